#include <mpslam/geometry.hpp>
#include <mpslam/errors.hpp>

#include <cmath>

namespace mpslam {

namespace {

constexpr double kDegenerateDenominator = 1e-12;

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Orientation of c relative to the directed line a->b: +1 left, -1 right, 0 collinear.
int orientation(const Vec2& a, const Vec2& b, const Vec2& c) {
    const double v = cross(b - a, c - a);
    const double scale = (b - a).norm() * (c - a).norm();
    if (std::abs(v) <= 1e-12 * std::max(scale, 1e-300)) return 0;
    return v > 0.0 ? 1 : -1;
}

bool on_segment(const Vec2& a, const Vec2& b, const Vec2& p) {
    return std::min(a.x(), b.x()) - 1e-12 <= p.x() && p.x() <= std::max(a.x(), b.x()) + 1e-12 &&
           std::min(a.y(), b.y()) - 1e-12 <= p.y() && p.y() <= std::max(a.y(), b.y()) + 1e-12;
}

}  // namespace

Surface Surface::make(const Vec2& normal, const Vec2& point) {
    const double n = normal.norm();
    if (!std::isfinite(n) || n < 1e-12 || !point.allFinite()) {
        throw DegenerateGeometry("surface normal must be finite and nonzero");
    }
    return Surface{normal / n, point};
}

Surface Wall::surface() const {
    const Vec2 direction = end - start;
    return Surface::make(Vec2(-direction.y(), direction.x()), start);
}

ArrayGeometry ArrayGeometry::uniform(std::size_t count, double spacing) {
    std::vector<Vec2> offsets;
    offsets.reserve(count);
    const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(count))));
    if (count > 1 && side * side == count) {
        const double half = 0.5 * static_cast<double>(side - 1);
        for (std::size_t row = 0; row < side; ++row) {
            for (std::size_t col = 0; col < side; ++col) {
                offsets.emplace_back((static_cast<double>(col) - half) * spacing,
                                     (static_cast<double>(row) - half) * spacing);
            }
        }
    } else {
        const double half = 0.5 * static_cast<double>(count > 0 ? count - 1 : 0);
        for (std::size_t h = 0; h < count; ++h) {
            offsets.emplace_back((static_cast<double>(h) - half) * spacing, 0.0);
        }
    }
    return from_offsets(offsets);
}

ArrayGeometry ArrayGeometry::from_offsets(std::span<const Vec2> offsets) {
    ArrayGeometry array;
    array.elements.reserve(offsets.size());
    for (const Vec2& o : offsets) {
        const double d = o.norm();
        array.elements.push_back({d, d > 0.0 ? wrap_angle(std::atan2(o.y(), o.x())) : 0.0});
    }
    return array;
}

Vec2 mirror_point(const Vec2& p, const Surface& s) {
    return p + 2.0 * (s.normal.dot(s.point) - s.normal.dot(p)) * s.normal;
}

Vec2 reflection_point(const Vec2& va, const Vec2& bs, const Vec2& mt, const Surface& s) {
    const Vec2 leg = mt - va;
    const double denominator = 2.0 * leg.dot(s.normal);
    if (std::abs(denominator) < kDegenerateDenominator) {
        throw DegenerateGeometry("MT lies on the mirror plane of the virtual anchor");
    }
    return va + ((bs - va).dot(s.normal) / denominator) * leg;
}

PathParams path_params(const Vec2& mt, double mt_heading, const Vec2& bs, const Vec2& va, bool los) {
    const Vec2 anchor = los ? bs : va;
    const double distance = (mt - anchor).norm();
    if (distance == 0.0) throw DegenerateGeometry("MT coincides with the anchor");
    PathParams path;
    path.distance = distance;
    path.aoa = wrap_angle(bearing(mt, anchor) - mt_heading);
    path.aod = wrap_angle(bearing(anchor, mt));
    path.bounce_count = los ? 0 : 1;
    return path;
}

Vec2 element_position(const Vec2& center, double frame_orientation, const ArrayElement& element) {
    return center + element.distance * unit_vector(frame_orientation + element.angle);
}

bool segments_intersect(const Vec2& a0, const Vec2& a1, const Vec2& b0, const Vec2& b1) {
    const int o1 = orientation(a0, a1, b0);
    const int o2 = orientation(a0, a1, b1);
    const int o3 = orientation(b0, b1, a0);
    const int o4 = orientation(b0, b1, a1);
    if (o1 != o2 && o3 != o4) return true;
    if (o1 == 0 && on_segment(a0, a1, b0)) return true;
    if (o2 == 0 && on_segment(a0, a1, b1)) return true;
    if (o3 == 0 && on_segment(b0, b1, a0)) return true;
    if (o4 == 0 && on_segment(b0, b1, a1)) return true;
    return false;
}

bool is_visible(const Vec2& mt, const Vec2& va, std::optional<std::size_t> reflector,
                std::span<const Wall> walls) {
    auto blocked = [&](const Vec2& from, const Vec2& to, std::optional<std::size_t> skip) {
        for (std::size_t w = 0; w < walls.size(); ++w) {
            if (skip && *skip == w) continue;
            if (segments_intersect(from, to, walls[w].start, walls[w].end)) return true;
        }
        return false;
    };

    if (!reflector) return !blocked(va, mt, std::nullopt);

    const Wall& wall = walls[*reflector];
    const Surface surface = wall.surface();
    // The MT must be on the BS side, i.e. opposite to the image.
    if (surface.signed_distance(mt) * surface.signed_distance(va) >= 0.0) return false;

    const Vec2 bs = mirror_point(va, surface);
    const Vec2 q = reflection_point(va, bs, mt, surface);
    const Vec2 along = wall.end - wall.start;
    const double t = (q - wall.start).dot(along) / along.squaredNorm();
    if (t < 0.0 || t > 1.0) return false;

    return !blocked(bs, q, reflector) && !blocked(q, mt, reflector);
}

std::vector<VirtualAnchor> single_bounce_anchors(const Vec2& bs, std::span<const Wall> walls) {
    std::vector<VirtualAnchor> anchors;
    anchors.reserve(walls.size() + 1);
    anchors.push_back({bs, std::nullopt});
    for (std::size_t w = 0; w < walls.size(); ++w) {
        anchors.push_back({mirror_point(bs, walls[w].surface()), w});
    }
    return anchors;
}

}  // namespace mpslam
