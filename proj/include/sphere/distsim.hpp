#pragma once

// Deterministic in-process simulation of the communicator hierarchy and the
// three distributed algorithms: pencil-decomposed SHT, latitude-sharded
// DISCO application, and ensemble-transposed CRPS. Ranks are logical tasks;
// every collective is a synchronization point executed by a sequential
// router with a fixed ascending-rank reduction order, so results are
// bit-reproducible. Traffic (bytes and call counts per collective) is
// recorded as a first-class output.
//
// Sharding follows the canonical rule: an extent n over p ranks splits into
// ceil(n/p) parts for the first n mod p ranks and floor(n/p) for the rest;
// data is never truncated or interpolated to force even splits.

#include <complex>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "sphere/convolution.hpp"
#include "sphere/field.hpp"
#include "sphere/grid.hpp"
#include "sphere/harmonics.hpp"
#include "sphere/metrics.hpp"
#include "sphere/tensor.hpp"

namespace sphere {

enum class CommAxis : std::size_t { batch = 0, ensemble = 1, polar = 2, azimuth = 3 };

inline const char* to_string(CommAxis a) {
    switch (a) {
        case CommAxis::batch: return "batch";
        case CommAxis::ensemble: return "ensemble";
        case CommAxis::polar: return "polar";
        case CommAxis::azimuth: return "azimuth";
    }
    return "?";
}

// Orthogonal communicator hierarchy over a (batch, ensemble, polar, azimuth)
// rank cube. Every rank belongs to exactly one communicator per axis.
struct CommGrid {
    std::array<std::size_t, 4> sizes{1, 1, 1, 1};

    CommGrid() = default;
    CommGrid(std::size_t nb, std::size_t ne, std::size_t nh, std::size_t nw)
        : sizes{nb, ne, nh, nw} {
        for (std::size_t s : sizes)
            if (s == 0) throw std::invalid_argument("CommGrid: sizes must be >= 1");
    }

    std::size_t world() const { return sizes[0] * sizes[1] * sizes[2] * sizes[3]; }
    std::size_t axis_size(CommAxis a) const { return sizes[static_cast<std::size_t>(a)]; }

    std::array<std::size_t, 4> coords(std::size_t rank) const {
        std::array<std::size_t, 4> c{};
        c[3] = rank % sizes[3];
        rank /= sizes[3];
        c[2] = rank % sizes[2];
        rank /= sizes[2];
        c[1] = rank % sizes[1];
        rank /= sizes[1];
        c[0] = rank;
        return c;
    }

    std::size_t rank_of(const std::array<std::size_t, 4>& c) const {
        return ((c[0] * sizes[1] + c[1]) * sizes[2] + c[2]) * sizes[3] + c[3];
    }

    // Members of the rank's communicator along one axis, ascending coordinate.
    std::vector<std::size_t> group_of(std::size_t rank, CommAxis axis) const {
        auto c = coords(rank);
        std::vector<std::size_t> members;
        for (std::size_t k = 0; k < axis_size(axis); ++k) {
            c[static_cast<std::size_t>(axis)] = k;
            members.push_back(rank_of(c));
        }
        return members;
    }

    // All distinct groups along an axis: one entry per combination of the
    // remaining coordinates.
    std::vector<std::vector<std::size_t>> groups(CommAxis axis) const {
        std::vector<std::vector<std::size_t>> out;
        std::vector<bool> seen(world(), false);
        for (std::size_t r = 0; r < world(); ++r) {
            if (seen[r]) continue;
            auto g = group_of(r, axis);
            for (std::size_t m : g) seen[m] = true;
            out.push_back(std::move(g));
        }
        return out;
    }
};

inline std::vector<std::size_t> canonical_split(std::size_t n, std::size_t p) {
    std::vector<std::size_t> parts(p, n / p);
    for (std::size_t k = 0; k < n % p; ++k) ++parts[k];
    return parts;
}

inline std::size_t split_offset(const std::vector<std::size_t>& parts, std::size_t k) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < k; ++i) off += parts[i];
    return off;
}

struct TrafficRecord {
    std::string operation;
    std::string axis;
    std::string collective;
    std::size_t bytes = 0;
    std::size_t calls = 0;
};

class TrafficLog {
public:
    void set_operation(std::string op) { op_ = std::move(op); }
    void record(const char* axis, const char* collective, std::size_t bytes) {
        for (auto& r : records_)
            if (r.operation == op_ && r.axis == axis && r.collective == collective) {
                r.bytes += bytes;
                r.calls += 1;
                return;
            }
        records_.push_back({op_, axis, collective, bytes, 1});
    }
    const std::vector<TrafficRecord>& records() const { return records_; }
    std::size_t calls(const std::string& op, const std::string& collective) const {
        std::size_t n = 0;
        for (const auto& r : records_)
            if (r.operation == op && r.collective == collective) n += r.calls;
        return n;
    }
    std::string csv() const {
        std::string out = "operation,axis,collective,bytes,calls\n";
        for (const auto& r : records_)
            out += r.operation + "," + r.axis + "," + r.collective + "," +
                   std::to_string(r.bytes) + "," + std::to_string(r.calls) + "\n";
        return out;
    }

private:
    std::string op_ = "unnamed";
    std::vector<TrafficRecord> records_;
};

// One simulated rank's shard of a global tensor plus its split bookkeeping:
// split[dim] holds every group member's extent along that dimension.
template <class T>
struct RankView {
    NdArray<T> local;
    std::map<std::size_t, std::vector<std::size_t>> split;
};

struct DistContext {
    CommGrid grid;
    TrafficLog log;
};

// --- collectives -------------------------------------------------------------

// All-to-all within each communicator of `axis`: dim_from (currently sharded
// there) becomes local, dim_to (currently local) becomes sharded with the
// canonical rule. Composing with the opposite transpose is the identity.
template <class T>
void distributed_transpose(DistContext& ctx, std::vector<RankView<T>>& views, CommAxis axis,
                           std::size_t dim_from, std::size_t dim_to) {
    const std::size_t p = ctx.grid.axis_size(axis);
    std::size_t bytes = 0;
    std::vector<NdArray<T>> fresh(views.size());
    for (const auto& group : ctx.grid.groups(axis)) {
        // validate bookkeeping
        for (std::size_t r : group) {
            const auto it = views[r].split.find(dim_from);
            if (it == views[r].split.end() || it->second.size() != p)
                throw std::invalid_argument(
                    "distributed_transpose: dim_from split bookkeeping mismatch");
            if (views[r].split.count(dim_to))
                throw std::invalid_argument("distributed_transpose: dim_to already sharded");
        }
        const std::size_t extent_to = views[group[0]].local.shape[dim_to];
        const std::vector<std::size_t> parts_to = canonical_split(extent_to, p);
        for (std::size_t j = 0; j < p; ++j) {
            std::vector<NdArray<T>> blocks;
            blocks.reserve(p);
            for (std::size_t i = 0; i < p; ++i) {
                NdArray<T> blk = slice_dim(views[group[i]].local, dim_to,
                                           split_offset(parts_to, j), parts_to[j]);
                if (i != j) bytes += blk.numel() * sizeof(T);
                blocks.push_back(std::move(blk));
            }
            fresh[group[j]] = concat_dim(blocks, dim_from);
        }
    }
    for (const auto& group : ctx.grid.groups(axis)) {
        const std::size_t extent_to = views[group[0]].local.shape[dim_to];
        for (std::size_t j = 0; j < p; ++j) {
            auto& v = views[group[j]];
            v.local = std::move(fresh[group[j]]);
            v.split.erase(dim_from);
            v.split[dim_to] = canonical_split(extent_to, p);
        }
    }
    ctx.log.record(to_string(axis), "all_to_all", bytes);
}

// Fixed-order sum within each communicator, all members receiving the result.
template <class T>
void all_reduce(DistContext& ctx, std::vector<RankView<T>>& views,
                std::initializer_list<CommAxis> axes) {
    // group ranks by their coordinates on the non-reduced axes
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t r = 0; r < ctx.grid.world(); ++r) {
        const auto c = ctx.grid.coords(r);
        std::string key;
        for (std::size_t a = 0; a < 4; ++a) {
            bool reduced = false;
            for (CommAxis ax : axes)
                if (static_cast<std::size_t>(ax) == a) reduced = true;
            key += reduced ? "*" : std::to_string(c[a]);
            key += ",";
        }
        groups[key].push_back(r);
    }
    std::size_t bytes = 0;
    std::string axis_label;
    for (CommAxis ax : axes) {
        if (!axis_label.empty()) axis_label += "+";
        axis_label += to_string(ax);
    }
    for (const auto& [key, members] : groups) {
        NdArray<T> sum = views[members[0]].local;
        for (std::size_t k = 1; k < members.size(); ++k)
            add_into(sum, views[members[k]].local);
        bytes += (members.size() - 1) * sum.numel() * sizeof(T);
        for (std::size_t r : members) views[r].local = sum;
    }
    ctx.log.record(axis_label.c_str(), "all_reduce", bytes);
}

// Sum within the communicator, then shard the given dimension canonically.
template <class T>
void reduce_scatter(DistContext& ctx, std::vector<RankView<T>>& views, CommAxis axis,
                    std::size_t dim) {
    const std::size_t p = ctx.grid.axis_size(axis);
    std::size_t bytes = 0;
    std::vector<NdArray<T>> fresh(views.size());
    std::vector<std::size_t> totals(views.size(), 0);
    for (const auto& group : ctx.grid.groups(axis)) {
        for (std::size_t r : group)
            if (views[r].local.shape != views[group[0]].local.shape)
                throw std::invalid_argument("reduce_scatter: shape divergence across group");
        NdArray<T> sum = views[group[0]].local;
        for (std::size_t k = 1; k < p; ++k) add_into(sum, views[group[k]].local);
        const std::vector<std::size_t> parts = canonical_split(sum.shape[dim], p);
        for (std::size_t j = 0; j < p; ++j) {
            fresh[group[j]] = slice_dim(sum, dim, split_offset(parts, j), parts[j]);
            totals[group[j]] = sum.shape[dim];
            bytes += (p - 1) * fresh[group[j]].numel() * sizeof(T);
        }
    }
    for (const auto& group : ctx.grid.groups(axis))
        for (std::size_t j = 0; j < p; ++j) {
            auto& v = views[group[j]];
            v.local = std::move(fresh[group[j]]);
            v.split[dim] = canonical_split(totals[group[j]], p);
        }
    ctx.log.record(to_string(axis), "reduce_scatter", bytes);
}

// Concatenate the sharded dimension within the communicator on every member.
template <class T>
void all_gather(DistContext& ctx, std::vector<RankView<T>>& views, CommAxis axis,
                std::size_t dim) {
    const std::size_t p = ctx.grid.axis_size(axis);
    std::size_t bytes = 0;
    std::vector<NdArray<T>> fresh(views.size());
    for (const auto& group : ctx.grid.groups(axis)) {
        std::vector<NdArray<T>> parts;
        for (std::size_t i = 0; i < p; ++i) parts.push_back(views[group[i]].local);
        NdArray<T> whole = concat_dim(parts, dim);
        for (std::size_t j = 0; j < p; ++j) {
            bytes += whole.numel() * sizeof(T) - parts[j].numel() * sizeof(T);
            fresh[group[j]] = whole;
        }
    }
    for (const auto& group : ctx.grid.groups(axis))
        for (std::size_t j = 0; j < p; ++j) {
            views[group[j]].local = std::move(fresh[group[j]]);
            views[group[j]].split.erase(dim);
        }
    ctx.log.record(to_string(axis), "all_gather", bytes);
}

// Root (axis coordinate 0) distributes canonical chunks of `dim`.
template <class T>
void scatter(DistContext& ctx, std::vector<RankView<T>>& views, CommAxis axis,
             std::size_t dim) {
    const std::size_t p = ctx.grid.axis_size(axis);
    std::size_t bytes = 0;
    std::vector<NdArray<T>> fresh(views.size());
    for (const auto& group : ctx.grid.groups(axis)) {
        const NdArray<T>& root = views[group[0]].local;
        const std::vector<std::size_t> parts = canonical_split(root.shape[dim], p);
        for (std::size_t j = 0; j < p; ++j) {
            fresh[group[j]] = slice_dim(root, dim, split_offset(parts, j), parts[j]);
            if (j != 0) bytes += fresh[group[j]].numel() * sizeof(T);
        }
    }
    for (const auto& group : ctx.grid.groups(axis)) {
        const std::size_t total = views[group[0]].local.shape[dim];
        for (std::size_t j = 0; j < p; ++j) {
            views[group[j]].local = std::move(fresh[group[j]]);
            views[group[j]].split[dim] = canonical_split(total, p);
        }
    }
    ctx.log.record(to_string(axis), "scatter", bytes);
}

// --- sharding helpers --------------------------------------------------------

// Split a per-problem global tensor across the spatial axes; problems are
// indexed by (batch, ensemble) coordinates.
template <class T>
std::vector<RankView<T>> shard(
    const DistContext& ctx, const std::vector<NdArray<T>>& problems,
    const std::map<std::size_t, CommAxis>& assignments) {
    std::vector<RankView<T>> views(ctx.grid.world());
    for (std::size_t r = 0; r < ctx.grid.world(); ++r) {
        const auto c = ctx.grid.coords(r);
        const NdArray<T>& global = problems[c[0] * ctx.grid.sizes[1] + c[1]];
        NdArray<T> local = global;
        RankView<T> v;
        for (const auto& [dim, axis] : assignments) {
            const std::size_t p = ctx.grid.axis_size(axis);
            const auto parts = canonical_split(global.shape[dim], p);
            if (parts.back() == 0)
                throw std::invalid_argument("shard: extent smaller than rank count");
            const std::size_t k = c[static_cast<std::size_t>(axis)];
            local = slice_dim(local, dim, split_offset(parts, k), parts[k]);
            v.split[dim] = parts;
        }
        v.local = std::move(local);
        views[r] = std::move(v);
    }
    return views;
}

// Reassemble the global tensor of one (batch, ensemble) problem.
template <class T>
NdArray<T> unshard(const DistContext& ctx, const std::vector<RankView<T>>& views,
                   const std::map<std::size_t, CommAxis>& assignments, std::size_t b = 0,
                   std::size_t e = 0) {
    std::array<std::size_t, 4> c{b, e, 0, 0};
    // global shape from the (0,0) spatial corner rank
    const RankView<T>& corner = views[ctx.grid.rank_of(c)];
    std::vector<std::size_t> gshape = corner.local.shape;
    for (const auto& [dim, axis] : assignments) {
        (void)axis;
        const auto it = corner.split.find(dim);
        if (it == corner.split.end())
            throw std::invalid_argument("unshard: missing split bookkeeping");
        gshape[dim] = 0;
        for (std::size_t part : it->second) gshape[dim] += part;
    }
    NdArray<T> global(gshape);
    for (std::size_t h = 0; h < ctx.grid.sizes[2]; ++h)
        for (std::size_t w = 0; w < ctx.grid.sizes[3]; ++w) {
            c[2] = h;
            c[3] = w;
            const RankView<T>& v = views[ctx.grid.rank_of(c)];
            // compute this rank's offsets
            std::vector<std::size_t> idx(gshape.size(), 0);
            std::vector<std::size_t> offs(gshape.size(), 0);
            for (const auto& [dim, axis] : assignments)
                offs[dim] = split_offset(v.split.at(dim),
                                         ctx.grid.coords(ctx.grid.rank_of(c))
                                             [static_cast<std::size_t>(axis)]);
            // odometer copy
            const auto& ls = v.local.shape;
            std::vector<std::size_t> li(ls.size(), 0);
            for (std::size_t n = 0; n < v.local.numel(); ++n) {
                for (std::size_t d = 0; d < ls.size(); ++d) idx[d] = offs[d] + li[d];
                global.at(idx) = v.local.data[n];
                for (std::size_t d = ls.size(); d-- > 0;) {
                    if (++li[d] < ls[d]) break;
                    li[d] = 0;
                }
            }
        }
    return global;
}

// --- distributed algorithms ---------------------------------------------------

// Pencil-decomposed forward SHT: transpose, longitudinal FFT with mode
// truncation, two transposes, Legendre contraction, final transpose. Input
// views hold [C, Hloc, Wloc]; output views hold [C, lmaxloc, mmaxloc].
inline std::vector<RankView<std::complex<double>>> dist_sht_forward(
    DistContext& ctx, std::vector<RankView<double>> views, const GridSpec& grid,
    std::size_t lmax, std::size_t mmax) {
    ctx.log.set_operation("dist_sht");
    const double fscale = 2.0 * pi / static_cast<double>(grid.nlon);

    distributed_transpose(ctx, views, CommAxis::azimuth, 2, 0);

    // local FFT along full longitudes, truncated to mmax
    std::vector<RankView<std::complex<double>>> cviews(views.size());
    for (std::size_t r = 0; r < views.size(); ++r) {
        const NdArray<double>& x = views[r].local;
        const std::size_t nc = x.shape[0], nh = x.shape[1], nw = x.shape[2];
        if (nw != grid.nlon)
            throw std::invalid_argument("dist_sht_forward: bookkeeping mismatch");
        NdArray<std::complex<double>> f({nc, nh, mmax});
        for (std::size_t c = 0; c < nc; ++c)
            for (std::size_t h = 0; h < nh; ++h) {
                const auto bins = rfft_bins(
                    std::span<const double>(x.data.data() + (c * nh + h) * nw, nw), mmax);
                for (std::size_t m = 0; m < mmax; ++m)
                    f.data[(c * nh + h) * mmax + m] = bins[m] * fscale;
            }
        cviews[r].local = std::move(f);
        cviews[r].split = views[r].split;  // C over azimuth, H over polar
        cviews[r].split.erase(2);
    }

    distributed_transpose(ctx, cviews, CommAxis::azimuth, 0, 2);
    distributed_transpose(ctx, cviews, CommAxis::polar, 1, 0);

    // Legendre contraction with quadrature weights folded in; m indices are
    // global via the azimuth split of dim 2
    const LegendreTable table = weighted_legendre_table(lmax, mmax, grid);
    for (std::size_t r = 0; r < cviews.size(); ++r) {
        const auto c = ctx.grid.coords(r);
        const NdArray<std::complex<double>>& x = cviews[r].local;
        const std::size_t nc = x.shape[0], nh = x.shape[1], nm = x.shape[2];
        if (nh != grid.nlat)
            throw std::invalid_argument("dist_sht_forward: latitude bookkeeping mismatch");
        const std::size_t moff = split_offset(cviews[r].split.at(2), c[3]);
        NdArray<std::complex<double>> out({nc, lmax, nm});
        for (std::size_t ch = 0; ch < nc; ++ch)
            for (std::size_t l = 0; l < lmax; ++l)
                for (std::size_t m = 0; m < nm; ++m) {
                    const std::size_t mg = moff + m;
                    if (mg > l) continue;
                    std::complex<double> acc{0.0, 0.0};
                    for (std::size_t h = 0; h < grid.nlat; ++h)
                        acc += table.at(h, l, mg) * x.data[(ch * nh + h) * nm + m];
                    out.data[(ch * lmax + l) * nm + m] = acc;
                }
        auto split = cviews[r].split;
        cviews[r].local = std::move(out);
        cviews[r].split = std::move(split);  // C over polar, m over azimuth
    }

    distributed_transpose(ctx, cviews, CommAxis::polar, 0, 1);
    return cviews;
}

// Latitude-sharded DISCO: transpose channels against longitudes, contract
// the rank-local psi rows, reduce-scatter the output latitudes, transpose
// back, then the embarrassingly parallel weight contraction.
inline std::vector<RankView<double>> dist_disco_apply(DistContext& ctx,
                                                      std::vector<RankView<double>> views,
                                                      const DiscoOperator& op,
                                                      const MixTensor& mix) {
    ctx.log.set_operation("dist_disco");
    const std::size_t nlat_in = op.in_grid.nlat;
    const std::size_t nlon_in = op.in_grid.nlon;
    const std::size_t nlat_out = op.out_grid.nlat;
    const std::size_t nlon_out = op.out_grid.nlon;
    const std::size_t nH = ctx.grid.axis_size(CommAxis::polar);

    distributed_transpose(ctx, views, CommAxis::azimuth, 2, 0);

    // local contraction over the rank's h_in rows, all output rows kept
    const std::vector<std::size_t> hparts = canonical_split(nlat_in, nH);
    for (std::size_t r = 0; r < views.size(); ++r) {
        const auto c = ctx.grid.coords(r);
        const NdArray<double>& x = views[r].local;
        const std::size_t nc = x.shape[0];
        if (x.shape[2] != nlon_in)
            throw std::invalid_argument("dist_disco_apply: bookkeeping mismatch");
        const std::size_t h0 = split_offset(hparts, c[2]);
        const std::size_t h1 = h0 + hparts[c[2]];
        if (x.shape[1] != hparts[c[2]])
            throw std::invalid_argument("dist_disco_apply: psi shard mismatch");

        NdArray<double> t({nc, op.n_basis, nlat_out, nlon_out});
        for (std::size_t k = 0; k < op.n_basis; ++k)
            for (std::size_t h = 0; h < nlat_out; ++h)
                for (const DiscoEntry& e : op.row(k, h)) {
                    if (e.h_in < h0 || e.h_in >= h1) continue;
                    for (std::size_t ch = 0; ch < nc; ++ch) {
                        const double* u =
                            x.data.data() + (ch * x.shape[1] + (e.h_in - h0)) * nlon_in;
                        double* dst =
                            t.data.data() + ((ch * op.n_basis + k) * nlat_out + h) * nlon_out;
                        std::size_t col = e.w_rel;
                        for (std::size_t w = 0; w < nlon_out; ++w) {
                            dst[w] += e.value * u[col];
                            col += op.stride;
                            if (col >= nlon_in) col -= nlon_in;
                        }
                    }
                }
        auto split = views[r].split;
        split.erase(1);  // H consumed by the contraction
        views[r].local = std::move(t);
        views[r].split = std::move(split);  // C still over azimuth
        // dims now: 0 C, 1 K, 2 H_out, 3 W_out
    }

    reduce_scatter(ctx, views, CommAxis::polar, 2);
    distributed_transpose(ctx, views, CommAxis::azimuth, 0, 3);

    // per-rank weight contraction over local C and K
    for (auto& v : views) {
        const NdArray<double>& t = v.local;
        const std::size_t nc = t.shape[0], nk = t.shape[1];
        const std::size_t nh = t.shape[2], nw = t.shape[3];
        if (nc != mix.c_in || nk != mix.k)
            throw std::invalid_argument("dist_disco_apply: mix tensor mismatch");
        NdArray<double> y({mix.c_out, nh, nw});
        for (std::size_t o = 0; o < mix.c_out; ++o)
            for (std::size_t ci = 0; ci < nc; ++ci)
                for (std::size_t k = 0; k < nk; ++k) {
                    const double wkc = mix.at(o, ci, k);
                    if (wkc == 0.0) continue;
                    const double* src = t.data.data() + (ci * nk + k) * nh * nw;
                    double* dst = y.data.data() + o * nh * nw;
                    for (std::size_t p = 0; p < nh * nw; ++p) dst[p] += wkc * src[p];
                }
        // dim indices shift with K consumed: H_out 2 -> 1, W_out 3 -> 2
        std::map<std::size_t, std::vector<std::size_t>> ns;
        if (v.split.count(2)) ns[1] = v.split.at(2);
        if (v.split.count(3)) ns[2] = v.split.at(3);
        v.local = std::move(y);
        v.split = std::move(ns);
    }
    return views;
}

// Ensemble-transposed CRPS: flatten space, transpose the ensemble dimension
// against the flattened spatial dimension, scatter the observation, run the
// local kernel, and all-reduce the partial scores. Forecast views hold
// [Eloc, C, Hloc, Wloc]; observation views hold [C, Hloc, Wloc] replicated
// across the ensemble axis. Returns per-batch, per-channel scores.
inline std::vector<std::vector<double>> dist_crps(DistContext& ctx,
                                                  std::vector<RankView<double>> fviews,
                                                  std::vector<RankView<double>> oviews,
                                                  const GridSpec& grid, CrpsVariant variant) {
    ctx.log.set_operation("dist_crps");
    const std::size_t nE = ctx.grid.axis_size(CommAxis::ensemble);
    const std::size_t nH = ctx.grid.axis_size(CommAxis::polar);
    const std::size_t nW = ctx.grid.axis_size(CommAxis::azimuth);
    const std::vector<std::size_t> hparts = canonical_split(grid.nlat, nH);
    const std::vector<std::size_t> wparts = canonical_split(grid.nlon, nW);

    // flatten [.., Hloc, Wloc] -> [.., Sloc]
    std::size_t eglobal = 0;
    {
        const auto& v = fviews[0];
        const auto it = v.split.find(0);
        if (it == v.split.end() || it->second.size() != nE)
            throw std::invalid_argument("dist_crps: ensemble split bookkeeping missing");
        for (std::size_t part : it->second) eglobal += part;
    }
    for (auto& v : fviews) {
        const auto s = v.local.shape;  // [Eloc, C, Hloc, Wloc]
        auto esplit = v.split.at(0);
        v.local.shape = {s[0], s[1], s[2] * s[3]};
        v.split.clear();
        v.split[0] = esplit;
    }
    for (auto& v : oviews) {
        const auto s = v.local.shape;  // [C, Hloc, Wloc]
        v.local.shape = {s[0], s[1] * s[2]};
        v.split.clear();
    }

    distributed_transpose(ctx, fviews, CommAxis::ensemble, 0, 2);
    scatter(ctx, oviews, CommAxis::ensemble, 1);

    // local kernel: quadrature-weighted partial sums per channel
    std::vector<RankView<double>> partial(fviews.size());
    for (std::size_t r = 0; r < fviews.size(); ++r) {
        const auto c = ctx.grid.coords(r);
        const NdArray<double>& f = fviews[r].local;  // [E, C, SlocE]
        const NdArray<double>& o = oviews[r].local;  // [C, SlocE]
        const std::size_t ne = f.shape[0], nc = f.shape[1], ns = f.shape[2];
        if (ne != eglobal || o.shape[1] != ns)
            throw std::invalid_argument("dist_crps: ensemble size not reconstructible");
        const std::size_t hloc = hparts[c[2]], wloc = wparts[c[3]];
        const std::size_t h0 = split_offset(hparts, c[2]);
        const std::size_t sloc = hloc * wloc;
        const std::size_t soff = split_offset(canonical_split(sloc, nE), c[1]);

        NdArray<double> s({nc});
        std::vector<double> members(ne);
        for (std::size_t ch = 0; ch < nc; ++ch) {
            double acc = 0.0;
            for (std::size_t k = 0; k < ns; ++k) {
                const std::size_t sg = soff + k;           // index within the spatial shard
                const std::size_t hg = h0 + sg / wloc;     // global latitude row
                for (std::size_t e = 0; e < ne; ++e)
                    members[e] = f.data[(e * nc + ch) * ns + k];
                acc += grid.quad_weights[hg] *
                       crps_pointwise(members, o.data[ch * ns + k], variant);
            }
            s.data[0 * nc + ch] = acc / four_pi;
        }
        partial[r].local = std::move(s);
    }

    all_reduce(ctx, partial, {CommAxis::ensemble, CommAxis::polar, CommAxis::azimuth});

    std::vector<std::vector<double>> out(ctx.grid.sizes[0]);
    for (std::size_t b = 0; b < ctx.grid.sizes[0]; ++b) {
        const std::size_t r = ctx.grid.rank_of({b, 0, 0, 0});
        out[b] = partial[r].local.data;
    }
    return out;
}

}  // namespace sphere
