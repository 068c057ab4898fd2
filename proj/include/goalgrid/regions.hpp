#pragma once

// Transfer / continuation regions, free-boundary thresholds, and the
// nonconvex features of the transfer regions (bulges and notches).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "goalgrid/coupling.hpp"
#include "goalgrid/error.hpp"
#include "goalgrid/grid.hpp"

namespace goalgrid {

enum class RegionLabel : char {
    TransferIntoGoal = 'L',
    TransferOutOfGoal = 'M',
    Continue = 'C',
};

inline char label_char(RegionLabel l) { return static_cast<char>(l); }

/// Default tolerance on the equation terms when labelling cells.
inline constexpr double kLabelTolerance = 1e-4;

/// Labels a cell by the term of the max-equation that binds. A transfer label
/// needs its constraint at zero and the continuation term strictly negative;
/// when both vanish within tol the cell belongs to the continuation region.
inline RegionLabel classify_cell(double pde_term, double into_gap, double out_gap, double tol) {
    if (pde_term < -tol) {
        const bool into = into_gap >= -tol;
        const bool out = out_gap >= -tol;
        if (into && (!out || into_gap >= out_gap)) return RegionLabel::TransferIntoGoal;
        if (out) return RegionLabel::TransferOutOfGoal;
    }
    return RegionLabel::Continue;
}

inline std::vector<RegionLabel> classify(std::span<const double> pde_term,
                                         std::span<const double> into_gap,
                                         std::span<const double> out_gap, double tol) {
    std::vector<RegionLabel> out(pde_term.size());
    for (std::size_t c = 0; c < out.size(); ++c) {
        out[c] = classify_cell(pde_term[c], into_gap[c], out_gap[c], tol);
    }
    return out;
}

/// Deadline labels straight from the optimal transfer plan.
inline std::vector<RegionLabel> labels_from_plan(const CoupledSlice& s) {
    std::vector<RegionLabel> out(s.plan.size(), RegionLabel::Continue);
    for (std::size_t c = 0; c < out.size(); ++c) {
        if (s.plan[c].into_goal() > 0.0) out[c] = RegionLabel::TransferIntoGoal;
        else if (s.plan[c].out_of_goal() > 0.0) out[c] = RegionLabel::TransferOutOfGoal;
    }
    return out;
}

/// Post-transfer wealth levels that delimit the deadline transfer regions.
struct ThresholdReport {
    /// x2 reached when the goal portfolio is sold back while still short of its target.
    double sellback_target = 0.0;
    /// Lowest x2 left behind when funding the goal portfolio.
    double transferin_floor = 0.0;
    /// Highest x2 filled from goal-portfolio surplus.
    double surplus_cap = 0.0;
    /// On the x2 = 0 row, the largest x1 whose sale stops at sellback_target.
    double split_abscissa = 0.0;
};

inline ThresholdReport extract_thresholds(const CoupledSlice& s, const GoalSpec& goal) {
    const double h = s.shape.axes[0].step;
    struct Move {
        std::array<double, 2> pre;
        std::array<double, 2> post;
    };
    std::vector<Move> outs, ins;
    for (std::size_t c = 0; c < s.plan.size(); ++c) {
        if (s.plan[c].out_of_goal() > 0.0) outs.push_back({s.shape.coords(c), s.post_transfer(c)});
        if (s.plan[c].into_goal() > 0.0) ins.push_back({s.shape.coords(c), s.post_transfer(c)});
    }
    if (outs.empty()) {
        throw Error(ErrorKind::EmptyRegion, "no transfer-out cells at the deadline");
    }
    if (ins.empty()) {
        throw Error(ErrorKind::EmptyRegion, "no transfer-in cells at the deadline");
    }
    auto key = [h](double x) { return static_cast<long>(std::lround(x / h)); };

    // Mode of post-transfer x2 over cells with x1 <= G + target; iterate the
    // self-referential cut to a fixed point starting from all transfer-out cells.
    double target = std::numeric_limits<double>::infinity();
    for (int round = 0; round < 16; ++round) {
        std::map<long, std::size_t> counts;
        for (const Move& m : outs) {
            if (m.pre[0] <= goal.target_amount + target + 0.5 * h) ++counts[key(m.post[1])];
        }
        if (counts.empty()) break;
        auto best = counts.begin();
        for (auto it = counts.begin(); it != counts.end(); ++it)
            if (it->second > best->second) best = it;
        const double next = static_cast<double>(best->first) * h;
        if (next == target) break;
        target = next;
    }

    ThresholdReport r;
    r.sellback_target = target;
    r.transferin_floor = std::numeric_limits<double>::infinity();
    for (const Move& m : ins) r.transferin_floor = std::min(r.transferin_floor, m.post[1]);
    r.surplus_cap = 0.0;
    bool any_surplus = false;
    for (const Move& m : outs) {
        if (m.pre[0] > goal.target_amount + target + 0.5 * h) {
            r.surplus_cap = std::max(r.surplus_cap, m.post[1]);
            any_surplus = true;
        }
    }
    if (!any_surplus) {
        throw Error(ErrorKind::EmptyRegion, "no surplus transfers beyond the sell-back band");
    }
    r.split_abscissa = 0.0;
    for (const Move& m : outs) {
        if (m.pre[1] < 0.5 * h && m.post[1] <= target + 0.5 * h) {
            r.split_abscissa = std::max(r.split_abscissa, m.pre[0]);
        }
    }
    return r;
}

enum class FeatureKind { Bulge, Notch };

struct Box {
    double x1_lo = 0.0, x1_hi = 0.0, x2_lo = 0.0, x2_hi = 0.0;

    bool overlaps(const Box& o) const {
        return x1_lo <= o.x1_hi && o.x1_lo <= x1_hi && x2_lo <= o.x2_hi && o.x2_lo <= x2_hi;
    }
};

struct Feature {
    FeatureKind kind = FeatureKind::Bulge;
    RegionLabel region = RegionLabel::TransferIntoGoal;
    Box box;
    std::size_t cells = 0;
};

inline const char* to_string(FeatureKind k) { return k == FeatureKind::Bulge ? "bulge" : "notch"; }

namespace detail {

// Axes of a transfer region: the portfolio that pays and the one that
// receives.
struct TransferAxes {
    std::size_t pay;
    std::size_t receive;
};

inline TransferAxes transfer_axes(RegionLabel region) {
    return region == RegionLabel::TransferIntoGoal ? TransferAxes{1, 0} : TransferAxes{0, 1};
}

// Marks cells with label `self` that have a cell satisfying `hit` further
// along `axis` (same coordinate on the other axis).
template <typename Pred>
std::vector<char> mark_along(const SliceShape& shape, std::span<const RegionLabel> labels,
                             RegionLabel self, std::size_t axis, Pred hit) {
    const std::size_t n1 = shape.axes[0].count;
    const std::size_t n2 = shape.axes[1].count;
    std::vector<char> out(labels.size(), 0);
    const std::size_t outer = axis == 0 ? n2 : n1;
    const std::size_t inner = axis == 0 ? n1 : n2;
    for (std::size_t o = 0; o < outer; ++o) {
        bool seen = false;
        for (std::size_t k = inner; k-- > 0;) {
            const std::size_t c = axis == 0 ? shape.index(k, o) : shape.index(o, k);
            if (labels[c] == self && seen) out[c] = 1;
            if (hit(labels[c])) seen = true;
        }
    }
    return out;
}

inline std::vector<std::vector<std::size_t>> components(const SliceShape& shape,
                                                        const std::vector<char>& mask) {
    const std::size_t n2 = shape.axes[1].count;
    const std::size_t n1 = shape.axes[0].count;
    std::vector<char> seen(mask.size(), 0);
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t start = 0; start < mask.size(); ++start) {
        if (!mask[start] || seen[start]) continue;
        std::vector<std::size_t> comp;
        std::vector<std::size_t> stack{start};
        seen[start] = 1;
        while (!stack.empty()) {
            const std::size_t c = stack.back();
            stack.pop_back();
            comp.push_back(c);
            const std::size_t i1 = c / n2, i2 = c % n2;
            const std::array<std::array<long, 2>, 4> nb{{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};
            for (const auto& d : nb) {
                const long j1 = static_cast<long>(i1) + d[0];
                const long j2 = static_cast<long>(i2) + d[1];
                if (j1 < 0 || j2 < 0 || j1 >= static_cast<long>(n1) || j2 >= static_cast<long>(n2))
                    continue;
                const std::size_t nc = static_cast<std::size_t>(j1) * n2 + static_cast<std::size_t>(j2);
                if (mask[nc] && !seen[nc]) {
                    seen[nc] = 1;
                    stack.push_back(nc);
                }
            }
        }
        std::sort(comp.begin(), comp.end());
        out.push_back(std::move(comp));
    }
    return out;
}

// Relabels cells that disagree with at least three of their in-grid
// neighbours when those neighbours agree, until nothing changes. Removes
// defects one cell wide, the resolution limit of the free boundaries.
inline std::vector<RegionLabel> fill_defects(const SliceShape& shape,
                                             std::span<const RegionLabel> labels) {
    const long n1 = static_cast<long>(shape.axes[0].count);
    const long n2 = static_cast<long>(shape.axes[1].count);
    std::vector<RegionLabel> cur(labels.begin(), labels.end());
    const std::array<std::array<long, 2>, 4> nb{{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};
    for (bool changed = true; changed;) {
        changed = false;
        std::vector<RegionLabel> next = cur;
        for (long i1 = 0; i1 < n1; ++i1) {
            for (long i2 = 0; i2 < n2; ++i2) {
                const std::size_t c = static_cast<std::size_t>(i1 * n2 + i2);
                std::array<int, 3> votes{};
                for (const auto& d : nb) {
                    const long j1 = i1 + d[0], j2 = i2 + d[1];
                    if (j1 < 0 || j2 < 0 || j1 >= n1 || j2 >= n2) continue;
                    const RegionLabel l = cur[static_cast<std::size_t>(j1 * n2 + j2)];
                    ++votes[l == RegionLabel::TransferIntoGoal ? 0 : l == RegionLabel::TransferOutOfGoal ? 1 : 2];
                }
                const std::array<RegionLabel, 3> kinds{RegionLabel::TransferIntoGoal,
                                                       RegionLabel::TransferOutOfGoal,
                                                       RegionLabel::Continue};
                for (std::size_t k = 0; k < 3; ++k) {
                    if (votes[k] >= 3 && cur[c] != kinds[k]) {
                        next[c] = kinds[k];
                        changed = true;
                    }
                }
            }
        }
        cur = std::move(next);
    }
    return cur;
}

inline Box bounding_box(const SliceShape& shape, const std::vector<std::size_t>& cells) {
    const double h = shape.axes[0].step;
    Box b{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity(),
          std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (std::size_t c : cells) {
        const auto x = shape.coords(c);
        b.x1_lo = std::min(b.x1_lo, x[0]);
        b.x1_hi = std::max(b.x1_hi, x[0]);
        b.x2_lo = std::min(b.x2_lo, x[1]);
        b.x2_hi = std::max(b.x2_hi, x[1]);
    }
    b.x1_lo -= 0.5 * h;
    b.x1_hi += 0.5 * h;
    b.x2_lo -= 0.5 * h;
    b.x2_hi += 0.5 * h;
    return b;
}

}  // namespace detail

/// Labels with one-cell defects filled: the region map that features and
/// region-level checks read.
inline std::vector<RegionLabel> region_map(const SliceShape& shape,
                                           std::span<const RegionLabel> labels) {
    return detail::fill_defects(shape, labels);
}

/// Bulges: transfer cells that reach further toward the receiving
/// portfolio than the region does at higher paying wealth, i.e. cells with a
/// non-region cell beyond them along the paying axis.
/// Notches: continuation cells with a region cell beyond them along the
/// receiving axis, i.e. pockets where a poorer receiver is left alone.
/// Defects one cell wide are filled first. Boxes carry half-step padding.
inline std::vector<Feature> detect_features(const SliceShape& shape,
                                            std::span<const RegionLabel> raw) {
    const std::vector<RegionLabel> labels = region_map(shape, raw);
    const std::span<const RegionLabel> view(labels);
    std::vector<Feature> out;
    for (RegionLabel region : {RegionLabel::TransferIntoGoal, RegionLabel::TransferOutOfGoal}) {
        const auto axes = detail::transfer_axes(region);
        const auto bulge = detail::mark_along(shape, view, region, axes.pay,
                                              [region](RegionLabel l) { return l != region; });
        const auto notch = detail::mark_along(shape, view, RegionLabel::Continue, axes.receive,
                                              [region](RegionLabel l) { return l == region; });
        for (const auto& comp : detail::components(shape, bulge))
            out.push_back({FeatureKind::Bulge, region, detail::bounding_box(shape, comp), comp.size()});
        for (const auto& comp : detail::components(shape, notch))
            out.push_back({FeatureKind::Notch, region, detail::bounding_box(shape, comp), comp.size()});
    }
    return out;
}

/// CSV `t,x1,x2,label` for every slice of a two-wealth labelling, time-major.
inline void write_regions_csv(std::ostream& os, const SliceShape& shape, const TimeLine& times,
                              std::span<const RegionLabel> labels) {
    os << "t,x1,x2,label\n";
    const std::size_t n = shape.cells();
    for (std::size_t k = 0; k < times.count; ++k) {
        const std::string t = fixed6(times.time(k));
        for (std::size_t c = 0; c < n; ++c) {
            const auto x = shape.coords(c);
            os << t << ',' << fixed6(x[0]) << ',' << fixed6(x[1]) << ','
               << label_char(labels[k * n + c]) << '\n';
        }
    }
}

}  // namespace goalgrid
