#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ragaudit/judge.hpp"
#include "ragaudit/predictor.hpp"
#include "ragaudit/signals.hpp"

namespace ragaudit {

inline FeatureVector features_of(const SignalRecord& record) {
    return FeatureVector{record.confidence, record.sufficient ? 1.0 : 0.0};
}

struct SelectiveDecision {
    std::string instance_id;
    bool answered = false;
    double score = 0.0;  // predictor risk score
    std::optional<Rating> rating;

    friend bool operator==(const SelectiveDecision&, const SelectiveDecision&) = default;
};

// The predictor emits hallucination risk; decisions compare the safety
// transform 1 − risk against the threshold, so "below threshold ⇒ abstain".
// Ties answer (≥). A response that already abstained is never force-answered.
inline std::vector<SelectiveDecision> decide_batch(const std::vector<SignalRecord>& signals,
                                                   const LogisticModel& model, double threshold) {
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw ConfigError("selective threshold must lie in [0,1]");
    }
    std::vector<SelectiveDecision> decisions;
    decisions.reserve(signals.size());
    for (const SignalRecord& record : signals) {
        SelectiveDecision d;
        d.instance_id = record.instance_id;
        d.score = score(model, features_of(record));
        double safety = 1.0 - d.score;
        d.answered = !record.abstained && safety >= threshold;
        decisions.push_back(std::move(d));
    }
    return decisions;
}

struct CoveragePoint {
    double threshold = 0.0;
    double coverage = 0.0;
    double selective_accuracy = 0.0;
    std::size_t n_answered = 0;
    std::size_t n_correct = 0;
    bool accuracy_undefined = false;  // n_answered = 0; accuracy reported as 0

    friend bool operator==(const CoveragePoint&, const CoveragePoint&) = default;
};

struct CoverageCurve {
    std::vector<CoveragePoint> points;  // coverage ascending

    friend bool operator==(const CoverageCurve&, const CoverageCurve&) = default;
};

// Sweep the safety threshold over every distinct safety score plus the 0 and
// 1 boundaries. Thresholds descend, so coverage ascends along the curve.
inline CoverageCurve coverage_curve(const std::vector<SignalRecord>& signals,
                                    const std::map<std::string, Rating>& ratings,
                                    const LogisticModel& model) {
    struct Row {
        double safety = 0.0;
        bool abstained = false;
        bool correct = false;
    };
    std::vector<Row> rows;
    rows.reserve(signals.size());
    std::set<double, std::greater<double>> thresholds{0.0, 1.0};
    for (const SignalRecord& record : signals) {
        auto it = ratings.find(record.instance_id);
        if (it == ratings.end()) {
            throw MissingInputError("no rating for instance '" + record.instance_id + "'");
        }
        Row row;
        row.safety = 1.0 - score(model, features_of(record));
        row.abstained = record.abstained;
        row.correct = (it->second == Rating::Correct);
        thresholds.insert(row.safety);
        rows.push_back(row);
    }

    CoverageCurve curve;
    const std::size_t total = rows.size();
    for (double t : thresholds) {
        CoveragePoint p;
        p.threshold = t;
        for (const Row& row : rows) {
            if (row.abstained || row.safety < t) continue;
            ++p.n_answered;
            if (row.correct) ++p.n_correct;
        }
        p.coverage = total == 0 ? 0.0
                               : static_cast<double>(p.n_answered) / static_cast<double>(total);
        if (p.n_answered == 0) {
            p.accuracy_undefined = true;
            p.selective_accuracy = 0.0;
        } else {
            p.selective_accuracy =
                static_cast<double>(p.n_correct) / static_cast<double>(p.n_answered);
        }
        curve.points.push_back(p);
    }
    return curve;
}

struct CurveDelta {
    double coverage = 0.0;
    double delta_accuracy = 0.0;

    friend bool operator==(const CurveDelta&, const CurveDelta&) = default;
};

namespace detail {

inline double interpolate_accuracy(const CoverageCurve& curve, double coverage) {
    const auto& pts = curve.points;
    auto it = std::lower_bound(pts.begin(), pts.end(), coverage,
                               [](const CoveragePoint& p, double c) { return p.coverage < c; });
    if (it == pts.end()) return pts.back().selective_accuracy;
    if (it->coverage == coverage || it == pts.begin()) return it->selective_accuracy;
    const CoveragePoint& hi = *it;
    const CoveragePoint& lo = *(it - 1);
    double span = hi.coverage - lo.coverage;
    double t = (coverage - lo.coverage) / span;
    return lo.selective_accuracy + t * (hi.selective_accuracy - lo.selective_accuracy);
}

}  // namespace detail

// Interpolate both curves onto the grid and difference them (a − b). Grid
// points outside either curve's coverage range are omitted with a warning.
inline std::vector<CurveDelta> compare_curves(const CoverageCurve& a, const CoverageCurve& b,
                                              const std::vector<double>& grid) {
    if (a.points.empty() || b.points.empty()) {
        throw Error("compare_curves needs two non-empty curves");
    }
    auto range = [](const CoverageCurve& c) {
        return std::pair<double, double>(c.points.front().coverage, c.points.back().coverage);
    };
    auto [a_lo, a_hi] = range(a);
    auto [b_lo, b_hi] = range(b);
    std::vector<CurveDelta> deltas;
    for (double g : grid) {
        if (g < a_lo || g > a_hi || g < b_lo || g > b_hi) {
            warn("compare_curves: grid point " + std::to_string(g) +
                 " outside curve coverage range; omitted");
            continue;
        }
        deltas.push_back(
            {g, detail::interpolate_accuracy(a, g) - detail::interpolate_accuracy(b, g)});
    }
    return deltas;
}

}  // namespace ragaudit
