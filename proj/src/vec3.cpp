#include "ctopt/vec3.hpp"

#include <cmath>

namespace ctopt {

Vec3 perpendicular_axis(const Vec3& n) {
    const double ax = std::abs(n.x), ay = std::abs(n.y), az = std::abs(n.z);
    // coordinate axis least aligned with n, ties resolved x before y before z
    Vec3 ref{0.0, 0.0, 1.0};
    if (ax <= ay && ax <= az) {
        ref = {1.0, 0.0, 0.0};
    } else if (ay <= az) {
        ref = {0.0, 1.0, 0.0};
    }
    const Vec3 unit = n.normalized();
    const Vec3 proj = ref - unit * ref.dot(unit);
    return proj.normalized();
}

OrthoBasis orthobasis(const Vec3& n) {
    const Vec3 unit = n.normalized();
    const Vec3 u = perpendicular_axis(unit);
    return {u, unit.cross(u)};
}

} // namespace ctopt
