#include "rootseg/root_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace rootseg {

namespace {

struct Capsule {
    Vec3 a, b;
    double ra = 0.0, rb = 0.0;
    Vec3 ab;
    double ab_len2 = 0.0;
    // AABB expanded by the larger radius
    Vec3 lo, hi;
};

Capsule make_capsule(const RootNode& na, const RootNode& nb) {
    Capsule c;
    c.a = na.position;
    c.b = nb.position;
    c.ra = na.radius;
    c.rb = nb.radius;
    c.ab = c.b - c.a;
    c.ab_len2 = c.ab.dot(c.ab);
    const double r = std::max(c.ra, c.rb);
    c.lo = {std::min(c.a.x, c.b.x) - r, std::min(c.a.y, c.b.y) - r,
            std::min(c.a.z, c.b.z) - r};
    c.hi = {std::max(c.a.x, c.b.x) + r, std::max(c.a.y, c.b.y) + r,
            std::max(c.a.z, c.b.z) + r};
    return c;
}

// Point-in-capsule with linearly interpolated radius at the closest
// segment parameter.
bool inside_capsule(const Capsule& c, const Vec3& q) {
    double t = 0.0;
    if (c.ab_len2 > 0.0) t = std::clamp((q - c.a).dot(c.ab) / c.ab_len2, 0.0, 1.0);
    const Vec3 closest = c.a + c.ab * t;
    const Vec3 diff = q - closest;
    const double r = c.ra + (c.rb - c.ra) * t;
    return diff.dot(diff) <= r * r;
}

std::vector<Capsule> build_capsules(const RootSystem& rs) {
    std::vector<Capsule> caps;
    caps.reserve(rs.segments.size());
    for (const Segment& s : rs.segments)
        caps.push_back(make_capsule(rs.nodes[s.a], rs.nodes[s.b]));
    // isolated single-node systems still occupy a sphere
    if (rs.segments.empty() && rs.nodes.size() == 1)
        caps.push_back(make_capsule(rs.nodes[0], rs.nodes[0]));
    return caps;
}

[[noreturn]] void parse_fail(std::size_t line_no, const std::string& what) {
    throw InputError("root model line " + std::to_string(line_no) + ": " + what);
}

} // namespace

double Vec3::norm() const { return std::sqrt(x * x + y * y + z * z); }

void RootSystem::validate() const {
    if (nodes.empty()) throw InputError("root model has no nodes");
    for (const RootNode& n : nodes) {
        if (!(n.radius > 0.0)) throw InputError("root model: nonpositive radius");
        if (!std::isfinite(n.position.x) || !std::isfinite(n.position.y) ||
            !std::isfinite(n.position.z) || !std::isfinite(n.radius))
            throw InputError("root model: non-finite node value");
    }
    std::vector<std::vector<std::size_t>> adj(nodes.size());
    for (const Segment& s : segments) {
        if (s.a >= nodes.size() || s.b >= nodes.size())
            throw InputError("root model: segment references missing node " +
                             std::to_string(std::max(s.a, s.b)));
        if (s.a == s.b) throw InputError("root model: self-loop segment");
        adj[s.a].push_back(s.b);
        adj[s.b].push_back(s.a);
    }
    // connectivity from the top node
    std::vector<char> seen(nodes.size(), 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    std::size_t reached = 1;
    while (!stack.empty()) {
        const std::size_t u = stack.back();
        stack.pop_back();
        for (std::size_t v : adj[u])
            if (!seen[v]) {
                seen[v] = 1;
                ++reached;
                stack.push_back(v);
            }
    }
    if (reached != nodes.size()) throw InputError("root model: graph is disconnected");
    if (segments.size() != nodes.size() - 1)
        throw InputError("root model: graph contains a cycle");
}

RootSystem parse_root_model(const std::string& text) {
    RootSystem rs;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue; // blank
        if (tag == "N") {
            RootNode n;
            if (!(ls >> n.position.x >> n.position.y >> n.position.z >> n.radius))
                parse_fail(line_no, "expected 'N x y z r'");
            if (!(n.radius > 0.0)) parse_fail(line_no, "nonpositive radius");
            rs.nodes.push_back(n);
        } else if (tag == "S") {
            long long a = 0, b = 0;
            if (!(ls >> a >> b)) parse_fail(line_no, "expected 'S i j'");
            if (a < 0 || b < 0) parse_fail(line_no, "negative node index");
            rs.segments.push_back({static_cast<std::size_t>(a), static_cast<std::size_t>(b)});
        } else {
            parse_fail(line_no, "unknown directive '" + tag + "'");
        }
        std::string extra;
        if (ls >> extra) parse_fail(line_no, "trailing tokens");
    }
    rs.validate();
    return rs;
}

RootSystem load_root_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open root model file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_root_model(buf.str());
}

RootSystem apply_transform(const RootSystem& rs, const Transform& t) {
    if (!(t.thickness_scale > 0.0))
        throw InputError("thickness scale must be positive");
    Vec3 axis = t.rotation_axis;
    const double axis_len = axis.norm();
    if (!(axis_len > 0.0)) throw InputError("rotation axis must be nonzero");
    axis = axis * (1.0 / axis_len);

    const double c = std::cos(t.rotation_rad);
    const double s = std::sin(t.rotation_rad);

    RootSystem out = rs;
    for (RootNode& n : out.nodes) {
        Vec3 p = n.position - t.center;
        if (t.mirror[0]) p.x = -p.x;
        if (t.mirror[1]) p.y = -p.y;
        if (t.mirror[2]) p.z = -p.z;
        // Rodrigues rotation about the normalized axis
        const Vec3 rotated =
            p * c + axis.cross(p) * s + axis * (axis.dot(p) * (1.0 - c));
        n.position = rotated + t.center + t.translation;
        n.radius *= t.thickness_scale;
    }
    return out;
}

BinaryMask3D voxelize_mask(const RootSystem& rs, const GridSpec& grid) {
    if (!(grid.voxel_size > 0.0)) throw InputError("voxel size must be positive");
    rs.validate();
    const auto caps = build_capsules(rs);
    BinaryMask3D mask(grid.dims);
    const double s = grid.voxel_size;

    for (const Capsule& cap : caps) {
        // voxel index range overlapping the capsule AABB
        const auto lo_idx = [&](double lo, double o) {
            return static_cast<std::ptrdiff_t>(std::floor((lo - o) / s - 0.5));
        };
        const auto hi_idx = [&](double hi, double o) {
            return static_cast<std::ptrdiff_t>(std::ceil((hi - o) / s - 0.5));
        };
        const std::size_t x0 = static_cast<std::size_t>(
            std::clamp<std::ptrdiff_t>(lo_idx(cap.lo.x, grid.origin.x), 0,
                                       static_cast<std::ptrdiff_t>(grid.dims.x)));
        const std::size_t x1 = static_cast<std::size_t>(
            std::clamp<std::ptrdiff_t>(hi_idx(cap.hi.x, grid.origin.x) + 1, 0,
                                       static_cast<std::ptrdiff_t>(grid.dims.x)));
        const std::size_t y0 = static_cast<std::size_t>(
            std::clamp<std::ptrdiff_t>(lo_idx(cap.lo.y, grid.origin.y), 0,
                                       static_cast<std::ptrdiff_t>(grid.dims.y)));
        const std::size_t y1 = static_cast<std::size_t>(
            std::clamp<std::ptrdiff_t>(hi_idx(cap.hi.y, grid.origin.y) + 1, 0,
                                       static_cast<std::ptrdiff_t>(grid.dims.y)));
        const std::size_t z0 = static_cast<std::size_t>(
            std::clamp<std::ptrdiff_t>(lo_idx(cap.lo.z, grid.origin.z), 0,
                                       static_cast<std::ptrdiff_t>(grid.dims.z)));
        const std::size_t z1 = static_cast<std::size_t>(
            std::clamp<std::ptrdiff_t>(hi_idx(cap.hi.z, grid.origin.z) + 1, 0,
                                       static_cast<std::ptrdiff_t>(grid.dims.z)));

        for (std::size_t z = z0; z < z1; ++z)
            for (std::size_t y = y0; y < y1; ++y)
                for (std::size_t x = x0; x < x1; ++x) {
                    if (mask.get(x, y, z)) continue;
                    const Vec3 center{grid.origin.x + (static_cast<double>(x) + 0.5) * s,
                                      grid.origin.y + (static_cast<double>(y) + 0.5) * s,
                                      grid.origin.z + (static_cast<double>(z) + 0.5) * s};
                    if (inside_capsule(cap, center)) mask.set(x, y, z);
                }
    }
    return mask;
}

Volume3D voxelize_signal(const RootSystem& rs, const GridSpec& grid, int supersample) {
    if (!(grid.voxel_size > 0.0)) throw InputError("voxel size must be positive");
    if (supersample < 1) throw InputError("supersample must be >= 1");
    rs.validate();
    const auto caps = build_capsules(rs);
    Volume3D vol(grid.dims);
    const double s = grid.voxel_size;
    const int n = supersample;
    const double inv_n3 = 1.0 / (static_cast<double>(n) * n * n);

    std::vector<const Capsule*> nearby;
    for (std::size_t z = 0; z < grid.dims.z; ++z) {
        const double vz = grid.origin.z + static_cast<double>(z) * s;
        for (std::size_t y = 0; y < grid.dims.y; ++y) {
            const double vy = grid.origin.y + static_cast<double>(y) * s;
            for (std::size_t x = 0; x < grid.dims.x; ++x) {
                const double vx = grid.origin.x + static_cast<double>(x) * s;
                nearby.clear();
                for (const Capsule& cap : caps)
                    if (vx + s >= cap.lo.x && vx <= cap.hi.x && vy + s >= cap.lo.y &&
                        vy <= cap.hi.y && vz + s >= cap.lo.z && vz <= cap.hi.z)
                        nearby.push_back(&cap);
                if (nearby.empty()) continue;

                int hit = 0;
                for (int k = 0; k < n; ++k)
                    for (int j = 0; j < n; ++j)
                        for (int i = 0; i < n; ++i) {
                            const Vec3 q{vx + (i + 0.5) / n * s, vy + (j + 0.5) / n * s,
                                         vz + (k + 0.5) / n * s};
                            for (const Capsule* cap : nearby)
                                if (inside_capsule(*cap, q)) {
                                    ++hit;
                                    break;
                                }
                        }
                vol.at(x, y, z) = static_cast<float>(hit * inv_n3);
            }
        }
    }
    return vol;
}

} // namespace rootseg
