#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>
#include <vector>

#include "pqeval/label_map.hpp"
#include "pqeval/metrics.hpp"

namespace pqeval {

enum class MatcherKind { naive_threshold, maximize_many_to_one };

struct MatchConfig {
    MetricKind metric = MetricKind::iou;  // IOU or DSC
    double threshold = 0.5;               // matching-score threshold (naive matcher)
    bool allow_many_to_one = false;
    MatcherKind matcher = MatcherKind::naive_threshold;
};

/// Assignment of prediction instances to reference instances. Every
/// prediction label lands in exactly one of `assignments` /
/// `unmatched_preds`; unmatched predictions are the false positives,
/// unmatched references the false negatives.
struct MatchResult {
    std::map<label_t, label_t> assignments;       // pred label -> ref label
    std::map<label_t, double> assignment_scores;  // pred label -> matching score
    std::vector<label_t> unmatched_preds;
    std::vector<label_t> unmatched_refs;
};

namespace detail {

inline void check_match_config(const MatchConfig& cfg) {
    if (cfg.metric == MetricKind::assd)
        throw std::invalid_argument("matching: metric must be IOU or DSC");
    if (!(cfg.threshold >= 0.0 && cfg.threshold <= 1.0))
        throw std::invalid_argument("matching: threshold must be in [0,1]");
}

inline void fill_unmatched(const OverlapTable& table, MatchResult& result) {
    for (const auto& [p, v] : table.pred_volumes)
        if (!result.assignments.count(p)) result.unmatched_preds.push_back(p);
    std::set<label_t> matched_refs;
    for (const auto& [p, r] : result.assignments) matched_refs.insert(r);
    for (const auto& [r, v] : table.ref_volumes)
        if (!matched_refs.count(r)) result.unmatched_refs.push_back(r);
}

}  // namespace detail

/// Threshold matcher: a candidate pair must exceed the matching-score
/// threshold (strictly). A prediction above threshold for several
/// references is eligible only for its best one; per reference either the
/// best eligible prediction wins or, with many-to-one allowed, all of them
/// do. Ties break toward the lower label.
inline MatchResult match_naive_threshold(const OverlapTable& table,
                                         const MatchConfig& cfg) {
    detail::check_match_config(cfg);
    if (cfg.matcher != MatcherKind::naive_threshold)
        throw std::invalid_argument("match_naive_threshold: wrong matcher kind");

    // Best reference per prediction among above-threshold pairs. Entries
    // are (pred, ref)-sorted, so ascending ref order makes "keep on
    // strictly greater" resolve score ties toward the lower ref label.
    struct Candidate {
        label_t ref = 0;
        double score = 0.0;
    };
    std::map<label_t, Candidate> best_ref;
    for (const auto& e : table.entries) {
        const double s = pair_score(e, cfg.metric);
        if (!(s > cfg.threshold)) continue;
        auto [it, inserted] = best_ref.try_emplace(e.pred_label, Candidate{e.ref_label, s});
        if (!inserted && s > it->second.score) it->second = {e.ref_label, s};
    }

    // Group eligible predictions per reference; map iteration gives
    // ascending pred labels, so ties again favor the lower label.
    std::map<label_t, std::vector<std::pair<label_t, double>>> per_ref;
    for (const auto& [p, cand] : best_ref)
        per_ref[cand.ref].push_back({p, cand.score});

    MatchResult result;
    for (const auto& [r, cands] : per_ref) {
        if (cfg.allow_many_to_one) {
            for (const auto& [p, s] : cands) {
                result.assignments[p] = r;
                result.assignment_scores[p] = s;
            }
        } else {
            std::pair<label_t, double> win = cands.front();
            for (const auto& c : cands)
                if (c.second > win.second) win = c;
            result.assignments[win.first] = r;
            result.assignment_scores[win.first] = win.second;
        }
    }
    detail::fill_unmatched(table, result);
    return result;
}

/// Greedy score-maximizing many-to-one matcher. Per reference (ascending
/// label): seed with the best unassigned prediction of positive score,
/// then absorb further positive-score predictions, best first, whenever
/// the merged mask strictly improves the score. No threshold applies here;
/// rejection by threshold happens at evaluation time.
///
/// Prediction instances are disjoint voxel sets, so the merged mask's
/// intersection and volume are plain sums over the member entries and the
/// whole search runs off the overlap table.
inline MatchResult match_maximize_many_to_one(const OverlapTable& table,
                                              const LabelMap& pred,
                                              const LabelMap& ref,
                                              const MatchConfig& cfg) {
    detail::check_match_config(cfg);
    if (cfg.matcher != MatcherKind::maximize_many_to_one)
        throw std::invalid_argument("match_maximize_many_to_one: wrong matcher kind");
    require_same_grid(pred, ref, "match_maximize_many_to_one");

    std::map<label_t, std::vector<const InstancePairStats*>> by_ref;
    for (const auto& e : table.entries)
        if (e.intersection > 0) by_ref[e.ref_label].push_back(&e);

    MatchResult result;
    std::set<label_t> assigned;

    for (const auto& [r, entries] : by_ref) {
        std::vector<std::pair<double, const InstancePairStats*>> cands;
        for (const auto* e : entries) {
            if (assigned.count(e->pred_label)) continue;
            const double s = pair_score(*e, cfg.metric);
            if (s > 0.0) cands.push_back({s, e});
        }
        if (cands.empty()) continue;
        // Descending individual score, ties toward the lower pred label.
        std::sort(cands.begin(), cands.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second->pred_label < b.second->pred_label;
        });

        const std::uint64_t ref_vol = table.ref_volumes.at(r);
        std::vector<label_t> group{cands.front().second->pred_label};
        std::uint64_t inter = cands.front().second->intersection;
        std::uint64_t vol = cands.front().second->pred_volume;
        double score = cands.front().first;

        for (std::size_t i = 1; i < cands.size(); ++i) {
            const auto* e = cands[i].second;
            const InstancePairStats merged{0, r, inter + e->intersection,
                                           vol + e->pred_volume, ref_vol};
            const double merged_score = pair_score(merged, cfg.metric);
            if (merged_score > score) {
                group.push_back(e->pred_label);
                inter = merged.intersection;
                vol = merged.pred_volume;
                score = merged_score;
            }
        }
        for (label_t p : group) {
            result.assignments[p] = r;
            result.assignment_scores[p] = score;
            assigned.insert(p);
        }
    }
    detail::fill_unmatched(table, result);
    return result;
}

/// Dispatch on the configured matcher.
inline MatchResult match_instances(const OverlapTable& table, const LabelMap& pred,
                                   const LabelMap& ref, const MatchConfig& cfg) {
    if (cfg.matcher == MatcherKind::naive_threshold)
        return match_naive_threshold(table, cfg);
    return match_maximize_many_to_one(table, pred, ref, cfg);
}

/// Rewrite the prediction map under a match: matched instances take their
/// reference label (merged groups share it), unmatched instances get fresh
/// labels above every reference label, allocated in ascending original
/// label order. The reference map itself is never touched, and no
/// prediction voxel is dropped.
inline LabelMap apply_match(const LabelMap& pred, const LabelMap& ref,
                            const MatchResult& result) {
    const std::vector<label_t> pred_labels = unique_labels(pred);
    const std::vector<label_t> ref_labels = unique_labels(ref);

    std::map<label_t, label_t> relabel;
    for (const auto& [p, r] : result.assignments) relabel[p] = r;

    std::set<label_t> pred_set(pred_labels.begin(), pred_labels.end());
    std::set<label_t> ref_set(ref_labels.begin(), ref_labels.end());
    for (const auto& [p, r] : result.assignments)
        if (!pred_set.count(p) || !ref_set.count(r))
            throw std::invalid_argument("apply_match: assignment references unknown label");

    label_t next = ref_labels.empty() ? 0 : ref_labels.back();
    std::vector<label_t> fps = result.unmatched_preds;
    std::sort(fps.begin(), fps.end());
    for (label_t p : fps) {
        if (!pred_set.count(p))
            throw std::invalid_argument("apply_match: unmatched pred label unknown");
        if (relabel.count(p))
            throw std::invalid_argument(
                "apply_match: pred label both assigned and unmatched");
        relabel[p] = ++next;
    }
    if (relabel.size() != pred_labels.size())
        throw std::invalid_argument(
            "apply_match: result does not cover every prediction label");

    LabelMap out(pred.shape(), pred.spacing());
    for (std::size_t i = 0; i < pred.size(); ++i)
        out[i] = pred[i] ? relabel.at(pred[i]) : 0;
    return out;
}

}  // namespace pqeval
