#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rootseg/root_model.hpp"
#include "rootseg/snr_bins.hpp"
#include "rootseg/volume.hpp"

namespace rootseg {

enum class NoiseKind { Perlin, Uniform, Gaussian };

NoiseKind noise_kind_from_string(const std::string& s);
std::string noise_kind_to_string(NoiseKind k);

struct NoiseSpec {
    NoiseKind kind = NoiseKind::Perlin;
    double amplitude = 1.0;
    double cell_size = 8.0;                         // voxels; perlin only
    std::vector<double> octave_amplitudes = {1.0};  // perlin only
    std::uint64_t seed = 0;

    void validate() const;
};

// Deterministic for a fixed (spec, dims). Perlin is classic gradient noise
// summed over octaves (frequency doubles per octave; octaves beyond the
// first sample at a seeded lattice offset). Uniform is iid in
// [0, amplitude]; gaussian is iid with mean 0 and stddev = amplitude.
Volume3D gen_noise(const NoiseSpec& spec, Dims dims);

// Mean signal intensity over root voxels divided by the RMS of `noise`
// over non-root voxels. Throws InputError on an empty root set or zero
// noise RMS. Pass the same volume as both arguments to measure a
// composite.
double measure_snr(const Volume3D& signal, const Volume3D& noise,
                   const BinaryMask3D& mask);

// measured_snr values are capped here so that effectively noiseless
// composites stay finite in manifests.
inline constexpr double kSnrCap = 1e12;

struct ComposeResult {
    Volume3D composite;   // (signal + noise_scale * noise - norm_offset) / norm_scale
    double noise_scale = 0.0;
    double norm_offset = 0.0;
    double norm_scale = 1.0;
    double measured_snr = 0.0; // SNR of the pre-normalization composite
};

// Rescales the noise field so the composite's measured SNR hits target_snr
// within 1% relative, then min-max normalizes to [0,1], recording the
// affine factors. A noise field with zero RMS off-root skips targeting
// (noise_scale 0, measured_snr capped).
ComposeResult compose_sample(const Volume3D& signal, const Volume3D& noise,
                             const BinaryMask3D& root_mask, double target_snr);

struct SampleMeta {
    std::uint64_t seed = 0;
    Transform transform;
    std::vector<NoiseSpec> noise;
    double target_snr = 0.0;
    double measured_snr = 0.0;
    double noise_scale = 0.0;
    double norm_offset = 0.0;
    double norm_scale = 1.0;
};

struct SamplePair {
    Volume3D input;            // x*y*z, values in [0,1]
    BinaryMask3D ground_truth; // 2x*2y*2z, aligned by construction
    SampleMeta meta;
};

struct GenerateConfig {
    GridSpec grid{Dims{32, 32, 16}, 1.0, {0.0, 0.0, 0.0}};
    int supersample = 4;

    // transform draw ranges
    double rot_max_deg = 180.0;
    bool arbitrary_axis = false; // default: rotate about z only
    bool mirror = true;          // mirror x/y with probability 1/2 each
    double thickness_min = 0.8;
    double thickness_max = 1.25;
    double translate_max_mm = 0.0;

    // noise draw ranges
    int noise_count_min = 1;
    int noise_count_max = 3;
    double noise_cell_min = 4.0;
    double noise_cell_max = 16.0;
    int noise_octaves = 3;
    double snr_min = 1.0;
    double snr_max = 100.0;

    std::size_t n_train = 384;
    std::size_t n_val = 384;
    std::uint64_t seed = 0;

    void validate() const;
};

// Canonical key=value serialization used for the config provenance hash.
std::string canonical_config(const GenerateConfig& c);

// Draws a transform and 1-3 noise specs, voxelizes the ground truth at 2x
// and the partial-volume signal at 1x from the same transformed system,
// and composes soil noise at a log-uniform target SNR. Pure function of
// (rs, config, seed).
SamplePair generate_pair(const RootSystem& rs, const GenerateConfig& config,
                         std::uint64_t seed);

struct ManifestEntry {
    std::uint64_t seed = 0;
    std::string input_path; // relative to the manifest directory
    std::string mask_path;
    double snr = 0.0;
};

struct DatasetManifest {
    std::string split; // "train" | "validation"
    std::string config_hash;
    std::vector<ManifestEntry> entries;
    std::filesystem::path root_dir; // directory the relative paths resolve against

    void validate() const; // no duplicate paths, all files exist
};

// Writes n_train + n_val pairs under out_dir/pairs/<split>/ with disjoint
// seed ranges ([seed, seed+n_train) and [seed+n_train, seed+n_train+n_val))
// plus one JSON-lines manifest per split. Returns the two manifests.
std::pair<DatasetManifest, DatasetManifest> generate_dataset(
    const std::vector<RootSystem>& models, const GenerateConfig& config,
    const std::filesystem::path& out_dir);

DatasetManifest load_manifest(const std::filesystem::path& manifest_path);

} // namespace rootseg
