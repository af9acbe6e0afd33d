#pragma once

// Image-source geometry: virtual anchors, reflection points, path parameters
// and visibility of single-bounce paths in a 2-D floor plan.

#include <mpslam/angles.hpp>

#include <optional>
#include <span>
#include <vector>

namespace mpslam {

/// Infinite reflective line given by a unit normal and any point on it.
struct Surface {
    Vec2 normal;
    Vec2 point;

    /// Normalizes `normal`; throws DegenerateGeometry for a zero or non-finite normal.
    static Surface make(const Vec2& normal, const Vec2& point);

    /// Signed distance of `p` from the surface along the normal.
    double signed_distance(const Vec2& p) const { return normal.dot(p - point); }
};

/// Finite wall segment; the reflecting surface is the line through it.
struct Wall {
    Vec2 start;
    Vec2 end;

    Surface surface() const;
    double length() const { return (end - start).norm(); }

    bool operator==(const Wall&) const = default;
};

struct ArrayElement {
    double distance = 0.0;  // m, from the array center
    double angle = 0.0;     // rad, in the array frame, [-pi, pi)
};

struct ArrayGeometry {
    std::vector<ArrayElement> elements;

    std::size_t size() const { return elements.size(); }

    /// H elements on a square grid (H a perfect square) or a line (otherwise),
    /// spaced `spacing` and centred on the array origin. H = 1 is a single
    /// element at the center.
    static ArrayGeometry uniform(std::size_t count, double spacing);

    /// Builds an array from element offsets in the array frame.
    static ArrayGeometry from_offsets(std::span<const Vec2> offsets);
};

struct PathParams {
    double distance = 0.0;  // m
    double aoa = 0.0;       // rad, MT frame
    double aod = 0.0;       // rad, global frame
    int bounce_count = 0;
};

/// Mirror image of `p` across `s`.
Vec2 mirror_point(const Vec2& p, const Surface& s);

/// Specular reflection point on `s` of the path bs -> s -> mt, where `va` is
/// the mirror image of `bs`. Throws DegenerateGeometry when mt lies on the
/// plane through va parallel to s.
Vec2 reflection_point(const Vec2& va, const Vec2& bs, const Vec2& mt, const Surface& s);

/// Distance, AoA (relative to `mt_heading`) and AoD of the path from the
/// (virtual) anchor `va` to the MT. `los` selects the direct path, for which
/// `va` must equal `bs`. The AoD is the direction from the anchor to the MT.
PathParams path_params(const Vec2& mt, double mt_heading, const Vec2& bs, const Vec2& va, bool los);

/// Position of an array element for an array centred at `center` with the
/// given frame orientation.
Vec2 element_position(const Vec2& center, double frame_orientation, const ArrayElement& element);

/// True if the closed segments [a0,a1] and [b0,b1] intersect.
bool segments_intersect(const Vec2& a0, const Vec2& a1, const Vec2& b0, const Vec2& b1);

/// Visibility of a path at the MT. `reflector` is the index of the wall that
/// generates `va` (nullopt for the direct path, with `va` the BS position).
bool is_visible(const Vec2& mt, const Vec2& va, std::optional<std::size_t> reflector,
                std::span<const Wall> walls);

/// A true (virtual) anchor of a BS: the BS itself or its image across one wall.
struct VirtualAnchor {
    Vec2 position;
    std::optional<std::size_t> wall;  // nullopt for the BS itself

    int bounce_count() const { return wall ? 1 : 0; }
};

/// The BS followed by its single-bounce images across every wall.
std::vector<VirtualAnchor> single_bounce_anchors(const Vec2& bs, std::span<const Wall> walls);

}  // namespace mpslam
