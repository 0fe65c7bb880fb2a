#include "rootseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace rootseg {

namespace {

using json = nlohmann::ordered_json;

struct Voxel {
    int x, y, z;
};

std::vector<Voxel> set_voxels(const BinaryMask3D& m) {
    std::vector<Voxel> out;
    const Dims& d = m.dims();
    for (std::size_t z = 0; z < d.z; ++z)
        for (std::size_t y = 0; y < d.y; ++y)
            for (std::size_t x = 0; x < d.x; ++x)
                if (m.get(x, y, z))
                    out.push_back({static_cast<int>(x), static_cast<int>(y),
                                   static_cast<int>(z)});
    return out;
}

MetricReport make_report(const DtCounts& c, unsigned d) {
    MetricReport r;
    r.tolerance = d;
    r.counts = c;
    const bool has_p = c.pred_total > 0;
    const bool has_r = c.gt_total > 0;
    r.precision = has_p ? static_cast<double>(c.dilated_gt_hits) /
                              static_cast<double>(c.pred_total)
                        : 0.0;
    r.recall = has_r ? static_cast<double>(c.dilated_pred_hits) /
                           static_cast<double>(c.gt_total)
                     : 0.0;
    const double pr = r.precision + r.recall;
    r.f1 = pr > 0.0 ? 2.0 * r.precision * r.recall / pr : 0.0;
    r.degenerate = !has_p || !has_r || pr == 0.0;
    return r;
}

// Exact 1D squared distance transform (lower envelope of parabolas).
// Intersections are kept as rationals and compared in 128-bit integers so
// the envelope, and therefore every output value, is exact.
void dt1d(const std::int64_t* f, std::int64_t* out, int n, int* v,
          std::int64_t* num, std::int64_t* den) {
    int k = 0;
    v[0] = 0;
    num[0] = std::numeric_limits<std::int64_t>::min() / 4; // acts as -inf
    den[0] = 1;
    for (int q = 1; q < n; ++q) {
        std::int64_t s_num, s_den;
        for (;;) {
            const int p = v[k];
            s_num = (f[q] + static_cast<std::int64_t>(q) * q) -
                    (f[p] + static_cast<std::int64_t>(p) * p);
            s_den = 2 * static_cast<std::int64_t>(q - p);
            if (k > 0 && static_cast<__int128>(s_num) * den[k] <=
                             static_cast<__int128>(num[k]) * s_den) {
                --k;
            } else {
                break;
            }
        }
        ++k;
        v[k] = q;
        num[k] = s_num;
        den[k] = s_den;
    }
    int j = 0;
    for (int i = 0; i < n; ++i) {
        while (j < k && num[j + 1] < static_cast<std::int64_t>(i) * den[j + 1]) ++j;
        const std::int64_t di = i - v[j];
        out[i] = di * di + f[v[j]];
    }
}

// Binary OR over a centered window of radius d along one axis
// (separable Chebyshev dilation).
void or_filter_line(const std::uint8_t* in, std::uint8_t* out, std::size_t n,
                    std::size_t stride, unsigned d) {
    std::size_t inside = 0; // set voxels currently inside the window
    const std::ptrdiff_t nn = static_cast<std::ptrdiff_t>(n);
    const std::ptrdiff_t rad = static_cast<std::ptrdiff_t>(d);
    for (std::ptrdiff_t i = -rad; i < std::min<std::ptrdiff_t>(rad, nn); ++i)
        if (i >= 0 && in[static_cast<std::size_t>(i) * stride]) ++inside;
    for (std::ptrdiff_t i = 0; i < nn; ++i) {
        const std::ptrdiff_t enter = i + rad;
        if (enter < nn && in[static_cast<std::size_t>(enter) * stride]) ++inside;
        out[static_cast<std::size_t>(i) * stride] = inside > 0 ? 1 : 0;
        const std::ptrdiff_t leave = i - rad;
        if (leave >= 0 && in[static_cast<std::size_t>(leave) * stride]) --inside;
    }
}

BinaryMask3D dilate_cube(const BinaryMask3D& mask, unsigned d) {
    const Dims& dims = mask.dims();
    BinaryMask3D cur = mask;
    BinaryMask3D next(dims);
    // x axis
    for (std::size_t z = 0; z < dims.z; ++z)
        for (std::size_t y = 0; y < dims.y; ++y) {
            const std::size_t base = cur.index(0, y, z);
            or_filter_line(cur.data().data() + base, next.data().data() + base, dims.x, 1,
                           d);
        }
    std::swap(cur, next);
    // y axis
    for (std::size_t z = 0; z < dims.z; ++z)
        for (std::size_t x = 0; x < dims.x; ++x) {
            const std::size_t base = cur.index(x, 0, z);
            or_filter_line(cur.data().data() + base, next.data().data() + base, dims.y,
                           dims.x, d);
        }
    std::swap(cur, next);
    // z axis
    for (std::size_t y = 0; y < dims.y; ++y)
        for (std::size_t x = 0; x < dims.x; ++x) {
            const std::size_t base = cur.index(x, y, 0);
            or_filter_line(cur.data().data() + base, next.data().data() + base, dims.z,
                           dims.x * dims.y, d);
        }
    std::swap(cur, next);
    return cur;
}

DtCounts dt_counts_ball(const BinaryMask3D& gt, const BinaryMask3D& pred, unsigned d,
                        const std::vector<std::int64_t>& edt_gt,
                        const std::vector<std::int64_t>& edt_pred) {
    const std::int64_t d2 = static_cast<std::int64_t>(d) * d;
    DtCounts c;
    const auto& g = gt.data();
    const auto& s = pred.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
        c.pred_total += s[i];
        c.gt_total += g[i];
        if (s[i] && edt_gt[i] <= d2) ++c.dilated_gt_hits;
        if (g[i] && edt_pred[i] <= d2) ++c.dilated_pred_hits;
    }
    return c;
}

DtCounts dt_counts_masks(const BinaryMask3D& gt, const BinaryMask3D& pred,
                         const BinaryMask3D& gt_dilated,
                         const BinaryMask3D& pred_dilated) {
    DtCounts c;
    const auto& g = gt.data();
    const auto& s = pred.data();
    const auto& gd = gt_dilated.data();
    const auto& sd = pred_dilated.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
        c.pred_total += s[i];
        c.gt_total += g[i];
        if (s[i] && gd[i]) ++c.dilated_gt_hits;
        if (g[i] && sd[i]) ++c.dilated_pred_hits;
    }
    return c;
}

void require_same_dims(const BinaryMask3D& a, const BinaryMask3D& b) {
    if (!(a.dims() == b.dims())) throw InputError("mask dimensions do not match");
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

json report_to_json(const MetricReport& r) {
    json j;
    j["tolerance"] = r.tolerance;
    j["precision"] = r.precision;
    j["recall"] = r.recall;
    j["f1"] = r.f1;
    j["degenerate"] = r.degenerate;
    j["counts"] = {{"dilated_gt_hits", r.counts.dilated_gt_hits},
                   {"pred_total", r.counts.pred_total},
                   {"dilated_pred_hits", r.counts.dilated_pred_hits},
                   {"gt_total", r.counts.gt_total}};
    return j;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write report file: " + path.string());
    return out;
}

} // namespace

StructuringElement element_from_string(const std::string& s) {
    if (s == "ball") return StructuringElement::Ball;
    if (s == "cube") return StructuringElement::Cube;
    throw InputError("unknown structuring element '" + s + "' (expected ball or cube)");
}

ConfusionCounts confusion(const BinaryMask3D& gt, const BinaryMask3D& pred) {
    require_same_dims(gt, pred);
    ConfusionCounts c;
    const auto& g = gt.data();
    const auto& s = pred.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g[i] && s[i]) ++c.tp;
        else if (!g[i] && s[i]) ++c.fp;
        else if (g[i] && !s[i]) ++c.fn;
        else ++c.tn;
    }
    return c;
}

MetricReport prf(const ConfusionCounts& c) {
    DtCounts dc;
    dc.dilated_gt_hits = c.tp;
    dc.pred_total = c.tp + c.fp;
    dc.dilated_pred_hits = c.tp;
    dc.gt_total = c.tp + c.fn;
    return make_report(dc, 0);
}

std::vector<std::int64_t> squared_edt(const BinaryMask3D& mask) {
    const Dims& d = mask.dims();
    const std::size_t n = d.count();
    std::vector<std::int64_t> grid(n);
    for (std::size_t i = 0; i < n; ++i) grid[i] = mask.data()[i] ? 0 : kEdtInfinity;

    const std::size_t maxlen = std::max({d.x, d.y, d.z});
    std::vector<std::int64_t> line(maxlen), out(maxlen), num(maxlen + 1), den(maxlen + 1);
    std::vector<int> v(maxlen + 1);

    auto run_lines = [&](std::size_t len, std::size_t stride, auto base_of,
                         std::size_t count) {
        for (std::size_t li = 0; li < count; ++li) {
            const std::size_t base = base_of(li);
            for (std::size_t i = 0; i < len; ++i) line[i] = grid[base + i * stride];
            dt1d(line.data(), out.data(), static_cast<int>(len), v.data(), num.data(),
                 den.data());
            for (std::size_t i = 0; i < len; ++i) grid[base + i * stride] = out[i];
        }
    };

    // x, then y, then z
    run_lines(d.x, 1, [&](std::size_t li) { return li * d.x; }, d.y * d.z);
    run_lines(d.y, d.x,
              [&](std::size_t li) {
                  const std::size_t z = li / d.x, x = li % d.x;
                  return z * d.x * d.y + x;
              },
              d.x * d.z);
    run_lines(d.z, d.x * d.y, [&](std::size_t li) { return li; }, d.x * d.y);

    for (auto& val : grid) val = std::min(val, kEdtInfinity);
    return grid;
}

BinaryMask3D dilate3(const BinaryMask3D& mask, unsigned d, StructuringElement element) {
    if (d == 0) return mask;
    if (element == StructuringElement::Cube) return dilate_cube(mask, d);
    const auto edt = squared_edt(mask);
    const std::int64_t d2 = static_cast<std::int64_t>(d) * d;
    BinaryMask3D out(mask.dims());
    for (std::size_t i = 0; i < edt.size(); ++i) out.data()[i] = edt[i] <= d2 ? 1 : 0;
    return out;
}

MetricReport dt_prf(const BinaryMask3D& gt, const BinaryMask3D& pred, unsigned d,
                    StructuringElement element) {
    require_same_dims(gt, pred);
    if (element == StructuringElement::Ball) {
        const auto edt_gt = squared_edt(gt);
        const auto edt_pred = squared_edt(pred);
        return make_report(dt_counts_ball(gt, pred, d, edt_gt, edt_pred), d);
    }
    const BinaryMask3D gd = dilate3(gt, d, element);
    const BinaryMask3D sd = dilate3(pred, d, element);
    return make_report(dt_counts_masks(gt, pred, gd, sd), d);
}

std::vector<MetricReport> dt_curve(const BinaryMask3D& gt, const BinaryMask3D& pred,
                                   unsigned d_max, StructuringElement element) {
    require_same_dims(gt, pred);
    std::vector<MetricReport> curve;
    curve.reserve(d_max + 1);
    if (element == StructuringElement::Ball) {
        // one EDT pair serves every tolerance
        const auto edt_gt = squared_edt(gt);
        const auto edt_pred = squared_edt(pred);
        for (unsigned d = 0; d <= d_max; ++d)
            curve.push_back(make_report(dt_counts_ball(gt, pred, d, edt_gt, edt_pred), d));
    } else {
        for (unsigned d = 0; d <= d_max; ++d) curve.push_back(dt_prf(gt, pred, d, element));
    }
    return curve;
}

MetricReport brute_force_dt(const BinaryMask3D& gt, const BinaryMask3D& pred, unsigned d,
                            StructuringElement element) {
    require_same_dims(gt, pred);
    const auto gv = set_voxels(gt);
    const auto sv = set_voxels(pred);
    const std::int64_t d2 = static_cast<std::int64_t>(d) * d;
    const int di = static_cast<int>(d);

    auto within = [&](const Voxel& a, const Voxel& b) {
        const int dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
        if (element == StructuringElement::Ball)
            return static_cast<std::int64_t>(dx) * dx + static_cast<std::int64_t>(dy) * dy +
                       static_cast<std::int64_t>(dz) * dz <=
                   d2;
        return std::abs(dx) <= di && std::abs(dy) <= di && std::abs(dz) <= di;
    };

    DtCounts c;
    c.pred_total = sv.size();
    c.gt_total = gv.size();
    for (const Voxel& s : sv)
        for (const Voxel& g : gv)
            if (within(s, g)) {
                ++c.dilated_gt_hits;
                break;
            }
    for (const Voxel& g : gv)
        for (const Voxel& s : sv)
            if (within(g, s)) {
                ++c.dilated_pred_hits;
                break;
            }
    return make_report(c, d);
}

SnrBinnedReport snr_binned(const std::vector<EvalSample>& samples) {
    if (samples.empty()) throw InputError("snr_binned requires at least one sample");
    SnrBinnedReport rep;
    rep.sample_count = samples.size();
    std::array<ConfusionCounts, kSnrBinCount> bin_counts{};
    ConfusionCounts overall;
    double f1_sum = 0.0;
    for (const EvalSample& s : samples) {
        const ConfusionCounts c = confusion(*s.gt, *s.pred);
        overall.tp += c.tp;
        overall.fp += c.fp;
        overall.fn += c.fn;
        overall.tn += c.tn;
        f1_sum += prf(c).f1;
        const SnrBin bin = snr_bin(s.snr);
        if (bin == SnrBin::Below) {
            ++rep.below_range;
        } else if (bin == SnrBin::Above) {
            ++rep.above_range;
        } else {
            const auto b = static_cast<std::size_t>(bin);
            bin_counts[b].tp += c.tp;
            bin_counts[b].fp += c.fp;
            bin_counts[b].fn += c.fn;
            bin_counts[b].tn += c.tn;
            ++rep.bin_samples[b];
        }
    }
    for (int b = 0; b < kSnrBinCount; ++b)
        rep.bins[static_cast<std::size_t>(b)] = prf(bin_counts[static_cast<std::size_t>(b)]);
    rep.overall = prf(overall);
    rep.mean_sample_f1 = f1_sum / static_cast<double>(samples.size());
    return rep;
}

void write_report_json(const MetricReport& r, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << report_to_json(r).dump(2) << "\n";
}

void write_report_csv(const MetricReport& r, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "tolerance,precision,recall,f1,degenerate\n";
    out << r.tolerance << "," << fmt_double(r.precision) << "," << fmt_double(r.recall)
        << "," << fmt_double(r.f1) << "," << (r.degenerate ? 1 : 0) << "\n";
}

void write_curve_csv(const std::vector<MetricReport>& curve,
                     const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "tolerance,precision,recall,f1\n";
    for (const MetricReport& r : curve)
        out << r.tolerance << "," << fmt_double(r.precision) << ","
            << fmt_double(r.recall) << "," << fmt_double(r.f1) << "\n";
}

void write_snr_report_json(const SnrBinnedReport& r, const std::filesystem::path& path) {
    json j;
    j["samples"] = r.sample_count;
    j["overall"] = report_to_json(r.overall);
    j["mean_sample_f1"] = r.mean_sample_f1;
    json bins = json::array();
    for (int b = 0; b < kSnrBinCount; ++b) {
        json jb = report_to_json(r.bins[static_cast<std::size_t>(b)]);
        jb["label"] = snr_bin_label(static_cast<SnrBin>(b));
        jb["samples"] = r.bin_samples[static_cast<std::size_t>(b)];
        bins.push_back(jb);
    }
    j["bins"] = bins;
    j["below_range"] = r.below_range;
    j["above_range"] = r.above_range;
    auto out = open_out(path);
    out << j.dump(2) << "\n";
}

void write_snr_report_csv(const SnrBinnedReport& r, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "bin,samples,precision,recall,f1\n";
    for (int b = 0; b < kSnrBinCount; ++b) {
        const auto& rep = r.bins[static_cast<std::size_t>(b)];
        out << snr_bin_label(static_cast<SnrBin>(b)) << ","
            << r.bin_samples[static_cast<std::size_t>(b)] << ","
            << fmt_double(rep.precision) << "," << fmt_double(rep.recall) << ","
            << fmt_double(rep.f1) << "\n";
    }
    out << "overall," << r.sample_count << "," << fmt_double(r.overall.precision) << ","
        << fmt_double(r.overall.recall) << "," << fmt_double(r.overall.f1) << "\n";
    out << "mean_sample_f1," << r.sample_count << ",,," << fmt_double(r.mean_sample_f1)
        << "\n";
}

} // namespace rootseg
