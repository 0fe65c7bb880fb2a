#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "rootseg/errors.hpp"

namespace rootseg {

// Voxel grid extents. z is the axis the plant root follows top to bottom;
// storage is z-major (x fastest).
struct Dims {
    std::size_t x = 0, y = 0, z = 0;

    std::size_t count() const { return x * y * z; }
    bool operator==(const Dims&) const = default;

    // Throws InputError if any extent is zero or x*y*z overflows size_t.
    void validate() const;
};

// Dense scalar field over a voxel grid (intensities or confidences).
class Volume3D {
public:
    Volume3D() = default;
    Volume3D(Dims dims, float fill = 0.0f);
    Volume3D(Dims dims, std::vector<float> voxels);

    const Dims& dims() const { return dims_; }
    std::size_t size() const { return voxels_.size(); }

    float& at(std::size_t x, std::size_t y, std::size_t z) {
        return voxels_[index(x, y, z)];
    }
    float at(std::size_t x, std::size_t y, std::size_t z) const {
        return voxels_[index(x, y, z)];
    }
    std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
        return (z * dims_.y + y) * dims_.x + x;
    }

    std::vector<float>& data() { return voxels_; }
    const std::vector<float>& data() const { return voxels_; }

    bool all_finite() const;
    double mean() const;

private:
    Dims dims_;
    std::vector<float> voxels_;
};

// Boolean voxel grid (root=1 / non-root=0). Same ordering as Volume3D.
class BinaryMask3D {
public:
    BinaryMask3D() = default;
    BinaryMask3D(Dims dims, bool fill = false);
    BinaryMask3D(Dims dims, std::vector<std::uint8_t> bits);

    const Dims& dims() const { return dims_; }
    std::size_t size() const { return bits_.size(); }

    void set(std::size_t x, std::size_t y, std::size_t z, bool v = true) {
        bits_[index(x, y, z)] = v ? 1 : 0;
    }
    bool get(std::size_t x, std::size_t y, std::size_t z) const {
        return bits_[index(x, y, z)] != 0;
    }
    std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
        return (z * dims_.y + y) * dims_.x + x;
    }

    std::vector<std::uint8_t>& data() { return bits_; }
    const std::vector<std::uint8_t>& data() const { return bits_; }

    std::size_t count_set() const;

private:
    Dims dims_;
    std::vector<std::uint8_t> bits_;
};

// Five consecutive z-layers of a volume centered on target_z; out-of-range
// layers are replicated from the nearest valid layer. Layer l (0..4)
// corresponds to z = target_z - 2 + l, clamped.
class LayerWindow {
public:
    static constexpr std::size_t kLayers = 5;

    LayerWindow() = default;
    LayerWindow(std::size_t x, std::size_t y);

    std::size_t x() const { return x_; }
    std::size_t y() const { return y_; }
    std::size_t layer_size() const { return x_ * y_; }

    float& at(std::size_t layer, std::size_t px, std::size_t py) {
        return values_[(layer * y_ + py) * x_ + px];
    }
    float at(std::size_t layer, std::size_t px, std::size_t py) const {
        return values_[(layer * y_ + py) * x_ + px];
    }

    // Contiguous layer-major storage, layer slowest.
    std::vector<float>& data() { return values_; }
    const std::vector<float>& data() const { return values_; }

    const float* layer(std::size_t l) const { return values_.data() + l * layer_size(); }

private:
    std::size_t x_ = 0, y_ = 0;
    std::vector<float> values_;
};

// --- file I/O -------------------------------------------------------------
//
// .vol3 / .msk3: 32-byte header followed by a raw little-endian payload in
// z-major order.
//   offset 0   magic "VOL3"
//   offset 4   u16 version (1)
//   offset 6   u16 value type: 1 = float32 volume, 2 = uint8 mask
//   offset 8   u64 x, u64 y, u64 z
// Mask payload bytes must be 0 or 1.

Volume3D load_volume(const std::filesystem::path& path);
void save_volume(const Volume3D& v, const std::filesystem::path& path);

BinaryMask3D load_mask(const std::filesystem::path& path);
void save_mask(const BinaryMask3D& m, const std::filesystem::path& path);

// --- resampling and windows -------------------------------------------------

// Each output voxel is the arithmetic mean of its 2x2x2 block. All dims must
// be even.
Volume3D downsample2(const Volume3D& v);

// Each input voxel replicated into a 2x2x2 block.
Volume3D upsample2_nearest(const Volume3D& v);

// Window of the five layers z_index-2 .. z_index+2 with clamping at the
// volume boundary. Throws InputError if z_index >= dims.z.
LayerWindow layer_window(const Volume3D& v, std::size_t z_index);

// Bit set iff confidence >= t. t must be in [0,1].
BinaryMask3D threshold(const Volume3D& conf, float t);

// --- slice rendering ---------------------------------------------------------

enum class Axis { X, Y, Z };

Axis axis_from_string(const std::string& s);

// Writes a binary PGM (P5) image of one slice, min-max normalized per slice;
// constant slices render as black.
void render_slice(const Volume3D& v, Axis axis, std::size_t index,
                  const std::filesystem::path& path);

} // namespace rootseg
