#include "rootseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>

#include <nlohmann/json.hpp>

#include "rootseg/hashing.hpp"
#include "rootseg/rng.hpp"

namespace rootseg {

namespace {

using json = nlohmann::ordered_json;

// Classic gradient noise: zero at lattice corners, C1-smooth fade between.
class Perlin3 {
public:
    explicit Perlin3(std::uint64_t seed) {
        Rng rng(seed);
        for (int i = 0; i < 256; ++i) perm_[i] = i;
        for (int i = 255; i > 0; --i)
            std::swap(perm_[i], perm_[rng.uniform_int(0, i)]);
        for (int i = 0; i < 256; ++i) perm_[256 + i] = perm_[i];
    }

    double at(double x, double y, double z) const {
        const double fx = std::floor(x), fy = std::floor(y), fz = std::floor(z);
        const int X = static_cast<int>(fx) & 255;
        const int Y = static_cast<int>(fy) & 255;
        const int Z = static_cast<int>(fz) & 255;
        x -= fx;
        y -= fy;
        z -= fz;
        const double u = fade(x), v = fade(y), w = fade(z);
        const int A = perm_[X] + Y, AA = perm_[A] + Z, AB = perm_[A + 1] + Z;
        const int B = perm_[X + 1] + Y, BA = perm_[B] + Z, BB = perm_[B + 1] + Z;
        return lerp(w,
                    lerp(v,
                         lerp(u, grad(perm_[AA], x, y, z), grad(perm_[BA], x - 1, y, z)),
                         lerp(u, grad(perm_[AB], x, y - 1, z),
                              grad(perm_[BB], x - 1, y - 1, z))),
                    lerp(v,
                         lerp(u, grad(perm_[AA + 1], x, y, z - 1),
                              grad(perm_[BA + 1], x - 1, y, z - 1)),
                         lerp(u, grad(perm_[AB + 1], x, y - 1, z - 1),
                              grad(perm_[BB + 1], x - 1, y - 1, z - 1))));
    }

private:
    static double fade(double t) { return t * t * t * (t * (t * 6 - 15) + 10); }
    static double lerp(double t, double a, double b) { return a + t * (b - a); }
    static double grad(int hash, double x, double y, double z) {
        const int h = hash & 15;
        const double u = h < 8 ? x : y;
        const double v = h < 4 ? y : (h == 12 || h == 14 ? x : z);
        return ((h & 1) ? -u : u) + ((h & 2) ? -v : v);
    }

    std::array<int, 512> perm_{};
};

Volume3D gen_perlin(const NoiseSpec& spec, Dims dims) {
    Perlin3 noise(spec.seed);
    // octaves beyond the first sample the lattice at a seeded offset so the
    // scales decorrelate
    Rng rng(spec.seed ^ 0x9d2c5680cafef00dULL);
    std::vector<Vec3> offsets(spec.octave_amplitudes.size());
    for (std::size_t o = 1; o < offsets.size(); ++o)
        offsets[o] = {rng.uniform(0.0, 256.0), rng.uniform(0.0, 256.0),
                      rng.uniform(0.0, 256.0)};

    Volume3D out(dims);
    for (std::size_t z = 0; z < dims.z; ++z)
        for (std::size_t y = 0; y < dims.y; ++y)
            for (std::size_t x = 0; x < dims.x; ++x) {
                double acc = 0.0;
                double freq = 1.0 / spec.cell_size;
                for (std::size_t o = 0; o < spec.octave_amplitudes.size(); ++o) {
                    acc += spec.octave_amplitudes[o] *
                           noise.at(static_cast<double>(x) * freq + offsets[o].x,
                                    static_cast<double>(y) * freq + offsets[o].y,
                                    static_cast<double>(z) * freq + offsets[o].z);
                    freq *= 2.0;
                }
                out.at(x, y, z) = static_cast<float>(spec.amplitude * acc);
            }
    return out;
}

Volume3D gen_uniform(const NoiseSpec& spec, Dims dims) {
    Rng rng(spec.seed);
    Volume3D out(dims);
    for (float& v : out.data()) v = static_cast<float>(spec.amplitude * rng.uniform());
    return out;
}

Volume3D gen_gaussian(const NoiseSpec& spec, Dims dims) {
    Rng rng(spec.seed);
    Volume3D out(dims);
    for (float& v : out.data()) v = static_cast<float>(rng.normal(0.0, spec.amplitude));
    return out;
}

struct SnrMoments {
    double mean_sig_root = 0.0;   // mean of signal over root voxels
    double mean_noise_root = 0.0; // mean of noise over root voxels
    double q_sig = 0.0;           // mean of signal^2 over non-root voxels
    double q_cross = 0.0;         // mean of signal*noise over non-root voxels
    double q_noise = 0.0;         // mean of noise^2 over non-root voxels
    std::size_t n_root = 0, n_off = 0;
};

SnrMoments snr_moments(const Volume3D& signal, const Volume3D& noise,
                       const BinaryMask3D& mask) {
    if (!(signal.dims() == mask.dims()) || !(noise.dims() == mask.dims()))
        throw InputError("snr: signal, noise, and mask dimensions must match");
    SnrMoments m;
    const auto& s = signal.data();
    const auto& n = noise.data();
    const auto& b = mask.data();
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (b[i]) {
            m.mean_sig_root += s[i];
            m.mean_noise_root += n[i];
            ++m.n_root;
        } else {
            m.q_sig += static_cast<double>(s[i]) * s[i];
            m.q_cross += static_cast<double>(s[i]) * n[i];
            m.q_noise += static_cast<double>(n[i]) * n[i];
            ++m.n_off;
        }
    }
    if (m.n_root > 0) {
        m.mean_sig_root /= static_cast<double>(m.n_root);
        m.mean_noise_root /= static_cast<double>(m.n_root);
    }
    if (m.n_off > 0) {
        m.q_sig /= static_cast<double>(m.n_off);
        m.q_cross /= static_cast<double>(m.n_off);
        m.q_noise /= static_cast<double>(m.n_off);
    }
    return m;
}

// SNR of signal + alpha*noise as a function of alpha.
double composite_snr(const SnrMoments& m, double alpha) {
    const double num = m.mean_sig_root + alpha * m.mean_noise_root;
    const double den2 = m.q_sig + 2.0 * alpha * m.q_cross + alpha * alpha * m.q_noise;
    if (den2 <= 0.0) return kSnrCap;
    return num / std::sqrt(den2);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

json transform_to_json(const Transform& t) {
    json j;
    j["rotation_rad"] = t.rotation_rad;
    j["axis"] = {t.rotation_axis.x, t.rotation_axis.y, t.rotation_axis.z};
    j["mirror"] = {t.mirror[0], t.mirror[1], t.mirror[2]};
    j["translation"] = {t.translation.x, t.translation.y, t.translation.z};
    j["thickness_scale"] = t.thickness_scale;
    j["center"] = {t.center.x, t.center.y, t.center.z};
    return j;
}

json noise_to_json(const NoiseSpec& s) {
    json j;
    j["kind"] = noise_kind_to_string(s.kind);
    j["amplitude"] = s.amplitude;
    if (s.kind == NoiseKind::Perlin) {
        j["cell_size"] = s.cell_size;
        j["octaves"] = s.octave_amplitudes;
    }
    j["seed"] = s.seed;
    return j;
}

} // namespace

NoiseKind noise_kind_from_string(const std::string& s) {
    if (s == "perlin") return NoiseKind::Perlin;
    if (s == "uniform") return NoiseKind::Uniform;
    if (s == "gaussian") return NoiseKind::Gaussian;
    throw InputError("unknown noise kind '" + s + "'");
}

std::string noise_kind_to_string(NoiseKind k) {
    switch (k) {
        case NoiseKind::Perlin: return "perlin";
        case NoiseKind::Uniform: return "uniform";
        case NoiseKind::Gaussian: return "gaussian";
    }
    return "?";
}

void NoiseSpec::validate() const {
    if (!(amplitude >= 0.0)) throw InputError("noise amplitude must be >= 0");
    if (kind == NoiseKind::Perlin) {
        if (!(cell_size >= 1.0)) throw InputError("perlin cell size must be >= 1 voxel");
        if (octave_amplitudes.empty())
            throw InputError("perlin octave amplitude list must not be empty");
    }
}

Volume3D gen_noise(const NoiseSpec& spec, Dims dims) {
    spec.validate();
    dims.validate();
    switch (spec.kind) {
        case NoiseKind::Perlin: return gen_perlin(spec, dims);
        case NoiseKind::Uniform: return gen_uniform(spec, dims);
        case NoiseKind::Gaussian: return gen_gaussian(spec, dims);
    }
    throw InputError("unknown noise kind");
}

double measure_snr(const Volume3D& signal, const Volume3D& noise,
                   const BinaryMask3D& mask) {
    const SnrMoments m = snr_moments(signal, noise, mask);
    if (m.n_root == 0) throw InputError("snr: mask has no root voxels");
    if (m.n_off == 0) throw InputError("snr: mask has no non-root voxels");
    const double rms = std::sqrt(m.q_noise);
    if (!(rms > 0.0)) throw InputError("snr: noise RMS over non-root voxels is zero");
    return m.mean_sig_root / rms;
}

ComposeResult compose_sample(const Volume3D& signal, const Volume3D& noise,
                             const BinaryMask3D& root_mask, double target_snr) {
    if (!(target_snr > 0.0)) throw InputError("target snr must be positive");
    const SnrMoments m = snr_moments(signal, noise, root_mask);
    if (m.n_root == 0) throw InputError("degenerate signal: no root voxels");
    if (m.n_off == 0) throw InputError("degenerate mask: no non-root voxels");

    double alpha = 0.0;
    double measured = 0.0;
    if (m.q_noise <= 0.0) {
        // noiseless input; nothing to scale
        measured = std::min(composite_snr(m, 0.0), kSnrCap);
    } else {
        // (mean_sig + a*mean_noise)^2 = T^2 * (q_sig + 2a*q_cross + a^2*q_noise)
        const double T2 = target_snr * target_snr;
        const double A = m.mean_noise_root * m.mean_noise_root - T2 * m.q_noise;
        const double B = 2.0 * (m.mean_sig_root * m.mean_noise_root - T2 * m.q_cross);
        const double C = m.mean_sig_root * m.mean_sig_root - T2 * m.q_sig;

        double best = -1.0, best_err = std::numeric_limits<double>::infinity();
        auto consider = [&](double a) {
            if (!(a >= 0.0) || !std::isfinite(a)) return;
            const double f = composite_snr(m, a);
            if (!(f > 0.0)) return;
            const double err = std::abs(f - target_snr) / target_snr;
            if (err < best_err) {
                best_err = err;
                best = a;
            }
        };
        if (A != 0.0) {
            const double disc = B * B - 4.0 * A * C;
            if (disc >= 0.0) {
                const double sq = std::sqrt(disc);
                consider((-B + sq) / (2.0 * A));
                consider((-B - sq) / (2.0 * A));
            }
        } else if (B != 0.0) {
            consider(-C / B);
        }

        if (best_err > 0.005) {
            // bisection fallback on the (essentially decreasing) SNR curve
            double lo = 1e-12, hi = 1.0;
            while (composite_snr(m, hi) > target_snr && hi < 1e18) hi *= 4.0;
            if (composite_snr(m, hi) > target_snr)
                throw InputError("cannot reach target snr by scaling this noise field");
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (composite_snr(m, mid) > target_snr) lo = mid;
                else hi = mid;
            }
            best = 0.5 * (lo + hi);
            best_err = std::abs(composite_snr(m, best) - target_snr) / target_snr;
        }
        if (best < 0.0 || best_err > 0.01)
            throw InputError("cannot reach target snr by scaling this noise field");
        alpha = best;
        measured = composite_snr(m, alpha);
    }

    ComposeResult res;
    res.noise_scale = alpha;
    res.measured_snr = std::min(measured, kSnrCap);

    Volume3D raw(signal.dims());
    const auto& s = signal.data();
    const auto& n = noise.data();
    for (std::size_t i = 0; i < s.size(); ++i)
        raw.data()[i] = static_cast<float>(s[i] + alpha * static_cast<double>(n[i]));

    const auto [mn_it, mx_it] = std::minmax_element(raw.data().begin(), raw.data().end());
    const float mn = *mn_it, mx = *mx_it;
    if (!(mx > mn)) throw InputError("degenerate composite: constant volume");
    res.norm_offset = mn;
    res.norm_scale = static_cast<double>(mx) - static_cast<double>(mn);
    for (float& v : raw.data())
        v = static_cast<float>((v - res.norm_offset) / res.norm_scale);
    res.composite = std::move(raw);
    return res;
}

void GenerateConfig::validate() const {
    grid.dims.validate();
    if (!(grid.voxel_size > 0.0)) throw InputError("voxel size must be positive");
    if (supersample < 1) throw InputError("supersample must be >= 1");
    if (!(thickness_min > 0.0) || thickness_max < thickness_min)
        throw InputError("invalid thickness range");
    if (noise_count_min < 1 || noise_count_max < noise_count_min ||
        noise_count_max > 3)
        throw InputError("noise count range must lie in [1,3]");
    if (!(snr_min > 0.0) || snr_max < snr_min) throw InputError("invalid snr range");
    if (!(noise_cell_min >= 1.0) || noise_cell_max < noise_cell_min)
        throw InputError("invalid perlin cell range");
    if (noise_octaves < 1) throw InputError("octave count must be >= 1");
    if (rot_max_deg < 0.0) throw InputError("rotation range must be >= 0");
    if (translate_max_mm < 0.0) throw InputError("translation range must be >= 0");
}

std::string canonical_config(const GenerateConfig& c) {
    std::string s;
    s += "grid=" + std::to_string(c.grid.dims.x) + "," + std::to_string(c.grid.dims.y) +
         "," + std::to_string(c.grid.dims.z);
    s += ";vox=" + fmt(c.grid.voxel_size);
    s += ";origin=" + fmt(c.grid.origin.x) + "," + fmt(c.grid.origin.y) + "," +
         fmt(c.grid.origin.z);
    s += ";ss=" + std::to_string(c.supersample);
    s += ";rot=" + fmt(c.rot_max_deg);
    s += ";arb=" + std::to_string(c.arbitrary_axis ? 1 : 0);
    s += ";mirror=" + std::to_string(c.mirror ? 1 : 0);
    s += ";thick=" + fmt(c.thickness_min) + "," + fmt(c.thickness_max);
    s += ";trans=" + fmt(c.translate_max_mm);
    s += ";nc=" + std::to_string(c.noise_count_min) + "," +
         std::to_string(c.noise_count_max);
    s += ";cell=" + fmt(c.noise_cell_min) + "," + fmt(c.noise_cell_max);
    s += ";oct=" + std::to_string(c.noise_octaves);
    s += ";snr=" + fmt(c.snr_min) + "," + fmt(c.snr_max);
    s += ";ntrain=" + std::to_string(c.n_train);
    s += ";nval=" + std::to_string(c.n_val);
    s += ";seed=" + std::to_string(c.seed);
    return s;
}

SamplePair generate_pair(const RootSystem& rs, const GenerateConfig& config,
                         std::uint64_t seed) {
    config.validate();
    Rng base(seed);
    for (int attempt = 0; attempt < 8; ++attempt) {
        Rng rng = base.fork(static_cast<std::uint64_t>(attempt));

        Transform t;
        t.rotation_rad = rng.uniform(-config.rot_max_deg, config.rot_max_deg) *
                         std::numbers::pi / 180.0;
        if (config.arbitrary_axis) {
            // uniform direction on the sphere
            const double zc = rng.uniform(-1.0, 1.0);
            const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
            const double r = std::sqrt(std::max(0.0, 1.0 - zc * zc));
            t.rotation_axis = {r * std::cos(phi), r * std::sin(phi), zc};
        }
        if (config.mirror) {
            t.mirror[0] = rng.bernoulli(0.5);
            t.mirror[1] = rng.bernoulli(0.5);
        }
        t.thickness_scale = rng.uniform(config.thickness_min, config.thickness_max);
        if (config.translate_max_mm > 0.0)
            t.translation = {rng.uniform(-config.translate_max_mm, config.translate_max_mm),
                             rng.uniform(-config.translate_max_mm, config.translate_max_mm),
                             rng.uniform(-config.translate_max_mm, config.translate_max_mm)};
        const GridSpec& g = config.grid;
        t.center = {g.origin.x + 0.5 * g.voxel_size * static_cast<double>(g.dims.x),
                    g.origin.y + 0.5 * g.voxel_size * static_cast<double>(g.dims.y),
                    g.origin.z + 0.5 * g.voxel_size * static_cast<double>(g.dims.z)};

        const RootSystem rst = apply_transform(rs, t);
        BinaryMask3D gt = voxelize_mask(rst, g.refined2());
        BinaryMask3D mask1 = voxelize_mask(rst, g);
        if (gt.count_set() == 0 || mask1.count_set() == 0 ||
            mask1.count_set() == mask1.size())
            continue; // transform pushed the root off (or over) the grid; redraw

        const Volume3D signal = voxelize_signal(rst, g, config.supersample);

        const int count =
            static_cast<int>(rng.uniform_int(config.noise_count_min, config.noise_count_max));
        std::vector<NoiseSpec> specs;
        Volume3D noise(g.dims, 0.0f);
        for (int i = 0; i < count; ++i) {
            NoiseSpec spec;
            spec.kind = i == 0 ? NoiseKind::Perlin
                               : static_cast<NoiseKind>(rng.uniform_int(0, 2));
            spec.amplitude = rng.uniform(0.5, 1.5);
            if (spec.kind == NoiseKind::Perlin) {
                spec.cell_size = rng.log_uniform(config.noise_cell_min, config.noise_cell_max);
                const double persistence = rng.uniform(0.4, 0.7);
                spec.octave_amplitudes.clear();
                double a = 1.0;
                for (int o = 0; o < config.noise_octaves; ++o) {
                    spec.octave_amplitudes.push_back(a);
                    a *= persistence;
                }
            }
            spec.seed = rng.next_u64();
            specs.push_back(spec);
            const Volume3D field = gen_noise(spec, g.dims);
            for (std::size_t k = 0; k < noise.size(); ++k)
                noise.data()[k] += field.data()[k];
        }

        const double target = rng.log_uniform(config.snr_min, config.snr_max);
        ComposeResult comp = compose_sample(signal, noise, mask1, target);

        SamplePair pair;
        pair.input = std::move(comp.composite);
        pair.ground_truth = std::move(gt);
        pair.meta.seed = seed;
        pair.meta.transform = t;
        pair.meta.noise = std::move(specs);
        pair.meta.target_snr = target;
        pair.meta.measured_snr = comp.measured_snr;
        pair.meta.noise_scale = comp.noise_scale;
        pair.meta.norm_offset = comp.norm_offset;
        pair.meta.norm_scale = comp.norm_scale;
        return pair;
    }
    throw InputError("could not generate a sample for seed " + std::to_string(seed) +
                     ": transformed root never intersects the grid");
}

void DatasetManifest::validate() const {
    std::set<std::string> seen;
    for (const ManifestEntry& e : entries) {
        if (!seen.insert(e.input_path).second || !seen.insert(e.mask_path).second)
            throw InputError("manifest lists a path twice: " + e.input_path);
        if (!std::filesystem::exists(root_dir / e.input_path))
            throw InputError("manifest references missing file: " + e.input_path);
        if (!std::filesystem::exists(root_dir / e.mask_path))
            throw InputError("manifest references missing file: " + e.mask_path);
    }
}

std::pair<DatasetManifest, DatasetManifest> generate_dataset(
    const std::vector<RootSystem>& models, const GenerateConfig& config,
    const std::filesystem::path& out_dir) {
    if (models.empty()) throw InputError("at least one root model is required");
    config.validate();
    const std::string hash = hash_hex(fnv1a64(canonical_config(config)));

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec || !std::filesystem::is_directory(out_dir))
        throw IoError("cannot create output directory: " + out_dir.string());

    auto run_split = [&](const std::string& split, std::uint64_t seed0,
                         std::size_t count) {
        const std::filesystem::path pair_dir = out_dir / "pairs" / split;
        std::filesystem::create_directories(pair_dir);
        DatasetManifest man;
        man.split = split;
        man.config_hash = hash;
        man.root_dir = out_dir;

        std::ofstream mf(out_dir / ("manifest_" + split + ".jsonl"), std::ios::trunc);
        if (!mf) throw IoError("cannot write manifest in " + out_dir.string());
        json header;
        header["type"] = "manifest";
        header["split"] = split;
        header["config_hash"] = hash;
        header["count"] = count;
        mf << header.dump() << "\n";

        for (std::size_t i = 0; i < count; ++i) {
            const std::uint64_t seed = seed0 + i;
            const RootSystem& model = models[i % models.size()];
            const SamplePair pair = generate_pair(model, config, seed);

            const std::string stem = std::to_string(seed);
            const std::string rel_in = "pairs/" + split + "/" + stem + ".vol3";
            const std::string rel_mask = "pairs/" + split + "/" + stem + ".msk3";
            save_volume(pair.input, out_dir / rel_in);
            save_mask(pair.ground_truth, out_dir / rel_mask);

            json line;
            line["seed"] = seed;
            line["input"] = rel_in;
            line["mask"] = rel_mask;
            line["snr"] = pair.meta.measured_snr;
            line["target_snr"] = pair.meta.target_snr;
            line["snr_bin"] = snr_bin_label(snr_bin(pair.meta.measured_snr));
            line["noise_scale"] = pair.meta.noise_scale;
            line["norm_offset"] = pair.meta.norm_offset;
            line["norm_scale"] = pair.meta.norm_scale;
            line["transform"] = transform_to_json(pair.meta.transform);
            json specs = json::array();
            for (const NoiseSpec& s : pair.meta.noise) specs.push_back(noise_to_json(s));
            line["noise"] = specs;
            mf << line.dump() << "\n";

            man.entries.push_back({seed, rel_in, rel_mask, pair.meta.measured_snr});
        }
        return man;
    };

    DatasetManifest train = run_split("train", config.seed, config.n_train);
    DatasetManifest val = run_split("validation", config.seed + config.n_train,
                                    config.n_val);
    return {std::move(train), std::move(val)};
}

DatasetManifest load_manifest(const std::filesystem::path& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot open manifest: " + manifest_path.string());
    DatasetManifest man;
    man.root_dir = manifest_path.parent_path();
    std::string line;
    bool have_header = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw InputError("manifest line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!have_header) {
            if (j.value("type", "") != "manifest")
                throw InputError("manifest missing header line: " + manifest_path.string());
            man.split = j.value("split", "");
            man.config_hash = j.value("config_hash", "");
            have_header = true;
            continue;
        }
        ManifestEntry e;
        e.seed = j.at("seed").get<std::uint64_t>();
        e.input_path = j.at("input").get<std::string>();
        e.mask_path = j.at("mask").get<std::string>();
        e.snr = j.at("snr").get<double>();
        man.entries.push_back(std::move(e));
    }
    if (!have_header) throw InputError("empty manifest: " + manifest_path.string());
    return man;
}

} // namespace rootseg
