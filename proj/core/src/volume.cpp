#include "rootseg/volume.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace rootseg {

namespace {

constexpr char kMagic[4] = {'V', 'O', 'L', '3'};
constexpr std::uint16_t kVersion = 1;
constexpr std::uint16_t kTypeF32 = 1;
constexpr std::uint16_t kTypeU8 = 2;

void put_u16(std::uint8_t* p, std::uint16_t v) {
    p[0] = static_cast<std::uint8_t>(v & 0xff);
    p[1] = static_cast<std::uint8_t>(v >> 8);
}

void put_u64(std::uint8_t* p, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>((v >> (8 * i)) & 0xff);
}

std::uint16_t get_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

struct Header {
    std::uint16_t type = 0;
    Dims dims;
};

void write_header(std::ofstream& out, std::uint16_t type, const Dims& d) {
    std::uint8_t h[32] = {};
    std::memcpy(h, kMagic, 4);
    put_u16(h + 4, kVersion);
    put_u16(h + 6, type);
    put_u64(h + 8, d.x);
    put_u64(h + 16, d.y);
    put_u64(h + 24, d.z);
    out.write(reinterpret_cast<const char*>(h), 32);
}

Header read_header(std::ifstream& in, const std::filesystem::path& path) {
    std::uint8_t h[32];
    in.read(reinterpret_cast<char*>(h), 32);
    if (in.gcount() != 32)
        throw InputError("malformed header (file shorter than 32 bytes): " + path.string());
    if (std::memcmp(h, kMagic, 4) != 0)
        throw InputError("malformed header (bad magic): " + path.string());
    if (get_u16(h + 4) != kVersion)
        throw InputError("malformed header (unsupported version): " + path.string());
    Header hdr;
    hdr.type = get_u16(h + 6);
    const std::uint64_t x = get_u64(h + 8), y = get_u64(h + 16), z = get_u64(h + 24);
    if (x == 0 || y == 0 || z == 0)
        throw InputError("malformed header (zero dimension): " + path.string());
    // overflow check before any allocation
    const std::uint64_t lim = std::numeric_limits<std::size_t>::max();
    if (y != 0 && x > lim / y) throw InputError("dimension overflow: " + path.string());
    const std::uint64_t xy = x * y;
    if (z != 0 && xy > lim / z) throw InputError("dimension overflow: " + path.string());
    hdr.dims = Dims{static_cast<std::size_t>(x), static_cast<std::size_t>(y),
                    static_cast<std::size_t>(z)};
    return hdr;
}

} // namespace

void Dims::validate() const {
    if (x == 0 || y == 0 || z == 0) throw InputError("dimensions must be positive");
    const std::size_t lim = std::numeric_limits<std::size_t>::max();
    if (x > lim / y || x * y > lim / z) throw InputError("dimension overflow");
}

Volume3D::Volume3D(Dims dims, float fill) : dims_(dims) {
    dims_.validate();
    voxels_.assign(dims_.count(), fill);
}

Volume3D::Volume3D(Dims dims, std::vector<float> voxels)
    : dims_(dims), voxels_(std::move(voxels)) {
    dims_.validate();
    if (voxels_.size() != dims_.count())
        throw InputError("voxel count does not match dimensions");
}

bool Volume3D::all_finite() const {
    return std::all_of(voxels_.begin(), voxels_.end(),
                       [](float v) { return std::isfinite(v); });
}

double Volume3D::mean() const {
    double s = 0.0;
    for (float v : voxels_) s += v;
    return voxels_.empty() ? 0.0 : s / static_cast<double>(voxels_.size());
}

BinaryMask3D::BinaryMask3D(Dims dims, bool fill) : dims_(dims) {
    dims_.validate();
    bits_.assign(dims_.count(), fill ? 1 : 0);
}

BinaryMask3D::BinaryMask3D(Dims dims, std::vector<std::uint8_t> bits)
    : dims_(dims), bits_(std::move(bits)) {
    dims_.validate();
    if (bits_.size() != dims_.count())
        throw InputError("bit count does not match dimensions");
    for (std::uint8_t b : bits_)
        if (b > 1) throw InputError("mask values must be 0 or 1");
}

std::size_t BinaryMask3D::count_set() const {
    std::size_t n = 0;
    for (std::uint8_t b : bits_) n += b;
    return n;
}

LayerWindow::LayerWindow(std::size_t x, std::size_t y) : x_(x), y_(y) {
    values_.assign(kLayers * x * y, 0.0f);
}

Volume3D load_volume(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open volume file: " + path.string());
    const Header hdr = read_header(in, path);
    if (hdr.type != kTypeF32)
        throw InputError("not a float32 volume (value type " + std::to_string(hdr.type) +
                         "): " + path.string());
    const std::size_t n = hdr.dims.count();
    std::vector<float> voxels(n);
    in.read(reinterpret_cast<char*>(voxels.data()),
            static_cast<std::streamsize>(n * sizeof(float)));
    if (static_cast<std::size_t>(in.gcount()) != n * sizeof(float))
        throw InputError("truncated payload in " + path.string());
    in.peek();
    if (!in.eof()) throw InputError("trailing bytes after payload in " + path.string());
    return Volume3D(hdr.dims, std::move(voxels));
}

void save_volume(const Volume3D& v, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write volume file: " + path.string());
    write_header(out, kTypeF32, v.dims());
    out.write(reinterpret_cast<const char*>(v.data().data()),
              static_cast<std::streamsize>(v.size() * sizeof(float)));
    if (!out) throw IoError("write failed: " + path.string());
}

BinaryMask3D load_mask(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open mask file: " + path.string());
    const Header hdr = read_header(in, path);
    if (hdr.type != kTypeU8)
        throw InputError("not a uint8 mask (value type " + std::to_string(hdr.type) +
                         "): " + path.string());
    const std::size_t n = hdr.dims.count();
    std::vector<std::uint8_t> bits(n);
    in.read(reinterpret_cast<char*>(bits.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
        throw InputError("truncated payload in " + path.string());
    in.peek();
    if (!in.eof()) throw InputError("trailing bytes after payload in " + path.string());
    return BinaryMask3D(hdr.dims, std::move(bits));
}

void save_mask(const BinaryMask3D& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write mask file: " + path.string());
    write_header(out, kTypeU8, m.dims());
    out.write(reinterpret_cast<const char*>(m.data().data()),
              static_cast<std::streamsize>(m.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

Volume3D downsample2(const Volume3D& v) {
    const Dims& d = v.dims();
    if (d.x % 2 || d.y % 2 || d.z % 2)
        throw InputError("downsample2 requires even dimensions");
    Volume3D out(Dims{d.x / 2, d.y / 2, d.z / 2});
    for (std::size_t z = 0; z < d.z / 2; ++z)
        for (std::size_t y = 0; y < d.y / 2; ++y)
            for (std::size_t x = 0; x < d.x / 2; ++x) {
                float s = 0.0f;
                for (std::size_t dz = 0; dz < 2; ++dz)
                    for (std::size_t dy = 0; dy < 2; ++dy)
                        for (std::size_t dx = 0; dx < 2; ++dx)
                            s += v.at(2 * x + dx, 2 * y + dy, 2 * z + dz);
                out.at(x, y, z) = s / 8.0f;
            }
    return out;
}

Volume3D upsample2_nearest(const Volume3D& v) {
    const Dims& d = v.dims();
    Volume3D out(Dims{d.x * 2, d.y * 2, d.z * 2});
    for (std::size_t z = 0; z < d.z; ++z)
        for (std::size_t y = 0; y < d.y; ++y)
            for (std::size_t x = 0; x < d.x; ++x) {
                const float val = v.at(x, y, z);
                for (std::size_t dz = 0; dz < 2; ++dz)
                    for (std::size_t dy = 0; dy < 2; ++dy)
                        for (std::size_t dx = 0; dx < 2; ++dx)
                            out.at(2 * x + dx, 2 * y + dy, 2 * z + dz) = val;
            }
    return out;
}

LayerWindow layer_window(const Volume3D& v, std::size_t z_index) {
    const Dims& d = v.dims();
    if (z_index >= d.z)
        throw InputError("layer index " + std::to_string(z_index) + " out of range [0, " +
                         std::to_string(d.z) + ")");
    LayerWindow w(d.x, d.y);
    const std::size_t plane = d.x * d.y;
    for (std::size_t l = 0; l < LayerWindow::kLayers; ++l) {
        const std::ptrdiff_t want = static_cast<std::ptrdiff_t>(z_index) - 2 +
                                    static_cast<std::ptrdiff_t>(l);
        const std::size_t z = static_cast<std::size_t>(
            std::clamp<std::ptrdiff_t>(want, 0, static_cast<std::ptrdiff_t>(d.z) - 1));
        std::copy_n(v.data().data() + z * plane, plane, w.data().data() + l * plane);
    }
    return w;
}

BinaryMask3D threshold(const Volume3D& conf, float t) {
    if (!(t >= 0.0f && t <= 1.0f)) throw InputError("threshold must be in [0,1]");
    BinaryMask3D m(conf.dims());
    const auto& src = conf.data();
    auto& dst = m.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] >= t ? 1 : 0;
    return m;
}

Axis axis_from_string(const std::string& s) {
    if (s == "x" || s == "X") return Axis::X;
    if (s == "y" || s == "Y") return Axis::Y;
    if (s == "z" || s == "Z") return Axis::Z;
    throw InputError("unknown axis '" + s + "' (expected x, y, or z)");
}

void render_slice(const Volume3D& v, Axis axis, std::size_t index,
                  const std::filesystem::path& path) {
    const Dims& d = v.dims();
    std::size_t w = 0, h = 0, limit = 0;
    switch (axis) {
        case Axis::X: limit = d.x; w = d.y; h = d.z; break;
        case Axis::Y: limit = d.y; w = d.x; h = d.z; break;
        case Axis::Z: limit = d.z; w = d.x; h = d.y; break;
    }
    if (index >= limit)
        throw InputError("slice index " + std::to_string(index) + " out of range [0, " +
                         std::to_string(limit) + ")");

    std::vector<float> slice(w * h);
    for (std::size_t row = 0; row < h; ++row)
        for (std::size_t col = 0; col < w; ++col) {
            float val = 0.0f;
            switch (axis) {
                case Axis::X: val = v.at(index, col, row); break;
                case Axis::Y: val = v.at(col, index, row); break;
                case Axis::Z: val = v.at(col, row, index); break;
            }
            slice[row * w + col] = val;
        }

    const auto [mn_it, mx_it] = std::minmax_element(slice.begin(), slice.end());
    const float mn = *mn_it, mx = *mx_it;
    const float range = mx - mn;

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write image file: " + path.string());
    out << "P5\n" << w << " " << h << "\n255\n";
    for (float val : slice) {
        // degenerate (constant) slices map to 0
        const float norm = range > 0.0f ? (val - mn) / range : 0.0f;
        const int px = std::clamp(static_cast<int>(std::lround(norm * 255.0f)), 0, 255);
        out.put(static_cast<char>(px));
    }
    if (!out) throw IoError("write failed: " + path.string());
}

} // namespace rootseg
