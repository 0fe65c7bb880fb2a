#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "rootseg/volume.hpp"

namespace rootseg {

// Millimeter-space point/vector.
struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const;
};

struct RootNode {
    Vec3 position; // mm
    double radius = 0.0; // mm
};

struct Segment {
    std::size_t a = 0, b = 0;
};

// Geometric root structural model: nodes connected into a tree. The first
// node in the file is the designated top node (the plant grows along +z,
// top to bottom).
struct RootSystem {
    std::vector<RootNode> nodes;
    std::vector<Segment> segments;

    // Throws InputError if any invariant is violated (dangling indices,
    // self-loops, cycles, disconnected graph, nonpositive radii).
    void validate() const;
};

struct Transform {
    double rotation_rad = 0.0;
    Vec3 rotation_axis{0.0, 0.0, 1.0}; // z by default; the root's long axis
    std::array<bool, 3> mirror{false, false, false};
    Vec3 translation; // mm
    double thickness_scale = 1.0;
    Vec3 center; // pivot for rotation and mirroring
};

// Line-oriented text format (.rootm):
//   # comment
//   N <x> <y> <z> <r>     node, mm
//   S <i> <j>             segment between node indices (0-based, file order)
RootSystem parse_root_model(const std::string& text);
RootSystem load_root_model(const std::filesystem::path& path);

// Mirrors about `center`, rotates about `rotation_axis` through `center`,
// translates, and scales every radius by thickness_scale. Topology is
// unchanged.
RootSystem apply_transform(const RootSystem& rs, const Transform& t);

// Voxel grid placement in mm space: voxel (i,j,k) has its center at
// origin + (i+0.5, j+0.5, k+0.5) * voxel_size.
struct GridSpec {
    Dims dims;
    double voxel_size = 1.0; // mm, isotropic
    Vec3 origin;             // mm, corner of voxel (0,0,0)

    // Same physical extent at twice the resolution.
    GridSpec refined2() const { return {Dims{dims.x * 2, dims.y * 2, dims.z * 2},
                                        voxel_size / 2.0, origin}; }
};

// A voxel is set iff its center lies within the root solid: the union of
// capsules (sphere-capped cylinders) over all segments, with the radius
// linearly interpolated between the endpoint radii.
BinaryMask3D voxelize_mask(const RootSystem& rs, const GridSpec& grid);

// Partial-volume signal: each voxel holds the fraction of it occupied by
// the root solid, estimated from supersample^3 stratified subcell centers.
Volume3D voxelize_signal(const RootSystem& rs, const GridSpec& grid, int supersample);

} // namespace rootseg
