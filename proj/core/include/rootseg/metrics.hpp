#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "rootseg/snr_bins.hpp"
#include "rootseg/volume.hpp"

namespace rootseg {

struct ConfusionCounts {
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

    std::size_t total() const { return tp + fp + fn + tn; }
};

// Shape of the distance-tolerance neighborhood. Ball is the Euclidean ball
// of radius d; Cube is the Chebyshev ball (cube of side 2d+1).
enum class StructuringElement { Ball, Cube };

StructuringElement element_from_string(const std::string& s);

// Raw sums behind the distance-tolerant precision/recall. At d=0 these
// collapse to (TP, TP+FP, TP, TP+FN).
struct DtCounts {
    std::size_t dilated_gt_hits = 0; // sum of dilate(G,d) * S
    std::size_t pred_total = 0;      // sum of S
    std::size_t dilated_pred_hits = 0; // sum of G * dilate(S,d)
    std::size_t gt_total = 0;        // sum of G

    bool operator==(const DtCounts&) const = default;
};

struct MetricReport {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    unsigned tolerance = 0;
    bool degenerate = false; // some denominator was zero
    DtCounts counts;
};

// Voxelwise confusion counts. Throws InputError on dimension mismatch.
ConfusionCounts confusion(const BinaryMask3D& gt, const BinaryMask3D& pred);

// Standard precision/recall/F1 from counts; zero denominators yield 0 and
// set the degenerate flag.
MetricReport prf(const ConfusionCounts& c);

// Morphological dilation by d voxels. d=0 is the identity.
BinaryMask3D dilate3(const BinaryMask3D& mask, unsigned d,
                     StructuringElement element = StructuringElement::Ball);

// Distance-tolerant precision/recall/F1:
//   p' = sum(dilate(G,d)*S) / sum(S),  r' = sum(G*dilate(S,d)) / sum(G)
MetricReport dt_prf(const BinaryMask3D& gt, const BinaryMask3D& pred, unsigned d,
                    StructuringElement element = StructuringElement::Ball);

// One report per tolerance d = 0..d_max.
std::vector<MetricReport> dt_curve(const BinaryMask3D& gt, const BinaryMask3D& pred,
                                   unsigned d_max,
                                   StructuringElement element = StructuringElement::Ball);

// Independent oracle for dt_prf: per-voxel neighbor search over the set
// voxel lists, no dilated masks constructed. Intended for small masks.
MetricReport brute_force_dt(const BinaryMask3D& gt, const BinaryMask3D& pred, unsigned d,
                            StructuringElement element = StructuringElement::Ball);

// Squared Euclidean distance (in voxel units) from every voxel to the
// nearest set voxel; kEdtInfinity where the mask is empty. Exact integer
// result. Exposed for reuse by dt_curve and for testing.
inline constexpr std::int64_t kEdtInfinity = std::int64_t{1} << 60;
std::vector<std::int64_t> squared_edt(const BinaryMask3D& mask);

struct EvalSample {
    const BinaryMask3D* gt = nullptr;
    const BinaryMask3D* pred = nullptr;
    double snr = 0.0;
};

struct SnrBinnedReport {
    std::array<MetricReport, kSnrBinCount> bins; // micro-averaged (pooled counts)
    std::array<std::size_t, kSnrBinCount> bin_samples{};
    std::size_t below_range = 0, above_range = 0;
    MetricReport overall;    // pooled over every sample
    double mean_sample_f1 = 0.0; // macro: mean per-sample F1, reported separately
    std::size_t sample_count = 0;
};

// Pools confusion counts per SNR bin and overall. Throws InputError on an
// empty list or mismatched dims.
SnrBinnedReport snr_binned(const std::vector<EvalSample>& samples);

// --- report output ----------------------------------------------------------

void write_report_json(const MetricReport& r, const std::filesystem::path& path);
void write_report_csv(const MetricReport& r, const std::filesystem::path& path);
void write_curve_csv(const std::vector<MetricReport>& curve,
                     const std::filesystem::path& path);
void write_snr_report_json(const SnrBinnedReport& r, const std::filesystem::path& path);
void write_snr_report_csv(const SnrBinnedReport& r, const std::filesystem::path& path);

} // namespace rootseg
