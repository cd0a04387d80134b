#pragma once
// Score decomposition and the derived quantities.
//
// Every choice carries two measurements: the full score log P(x|Q,C) and the
// question-dropped score log P(x|C). Each metric splits its score into a
// choice-driven component (computed from the question-dropped context) and a
// question-driven remainder, so that
//
//   score == choice_component + question_component
//
// holds exactly by construction. The top-two component differences give
// delta_choice / delta_question, and an instance is choice-sensitive when
// delta_choice > delta_question (strict; ties count as question-driven).
//
// The question-shift score is
//
//   npsq = (log P(x|Q,C) - log P(x|C)) / (-log P(x|C))
//
// which is 0 when the question adds nothing and at most 1 when
// log P(x|Q,C) <= 0. A choice whose question-free probability is ~1 has no
// usable denominator; such choices are excluded from npsq ranking and counted.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qshift/core.hpp"

namespace qshift {

// log P(x|C) this close to zero makes the npsq denominator unusable.
inline constexpr double kDegenerateBaselineEps = 1e-12;

struct ChoiceScore {
    double logprob_full = 0.0;        // log P(x|Q,C)
    int tokens_full = 0;
    double logprob_choice_only = 0.0; // log P(x|C)
    int tokens_choice_only = 0;
};

// All measured choices of one instance.
struct ChoiceScores {
    std::string instance_id;
    int answer_index = 0;
    std::vector<ChoiceScore> choices;
};

inline bool degenerate_baseline(const ChoiceScore& c) {
    return c.logprob_choice_only >= -kDegenerateBaselineEps;
}

inline std::optional<double> npsq_value(const ChoiceScore& c) {
    if (degenerate_baseline(c)) return std::nullopt;
    return (c.logprob_full - c.logprob_choice_only) / (-c.logprob_choice_only);
}

inline double metric_score(MetricKind metric, const ChoiceScores& cs, int index) {
    const ChoiceScore& c = cs.choices.at(index);
    switch (metric) {
        case MetricKind::Acc:
            return c.logprob_full;
        case MetricKind::AccNorm:
            if (c.tokens_full <= 0)
                throw Error(Errc::ValidationError,
                            "instance '" + cs.instance_id +
                                "': nonpositive token count for acc_norm");
            return c.logprob_full / c.tokens_full;
        case MetricKind::AccNpsq: {
            auto v = npsq_value(c);
            if (!v)
                throw Error(Errc::DegenerateBaseline,
                            "instance '" + cs.instance_id + "' choice " +
                                std::to_string(index) +
                                ": log P(x|C) ~ 0, npsq undefined");
            return *v;
        }
    }
    throw Error(Errc::ConfigError, "bad metric");
}

// (choice_component, question_component); their sum is the metric score.
// acc_norm normalizes each side by its own continuation token count, so the
// identity survives differing tokenizations. npsq has no choice-driven part.
inline std::pair<double, double> decompose(MetricKind metric,
                                           const ChoiceScores& cs, int index) {
    const ChoiceScore& c = cs.choices.at(index);
    switch (metric) {
        case MetricKind::Acc:
            return {c.logprob_choice_only, c.logprob_full - c.logprob_choice_only};
        case MetricKind::AccNorm: {
            if (c.tokens_full <= 0 || c.tokens_choice_only <= 0)
                throw Error(Errc::ValidationError,
                            "instance '" + cs.instance_id +
                                "': nonpositive token count for acc_norm");
            double choice = c.logprob_choice_only / c.tokens_choice_only;
            double total = c.logprob_full / c.tokens_full;
            return {choice, total - choice};
        }
        case MetricKind::AccNpsq:
            return {0.0, metric_score(metric, cs, index)};
    }
    throw Error(Errc::ConfigError, "bad metric");
}

// Choice indices ordered by metric score, highest first, ties by lowest
// index. Under acc_npsq, degenerate-baseline choices are left out.
inline std::vector<int> ranked_choices(MetricKind metric, const ChoiceScores& cs) {
    std::vector<std::pair<double, int>> scored;
    for (int i = 0; i < static_cast<int>(cs.choices.size()); ++i) {
        if (metric == MetricKind::AccNpsq && degenerate_baseline(cs.choices[i]))
            continue;
        scored.emplace_back(metric_score(metric, cs, i), i);
    }
    std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<int> order;
    order.reserve(scored.size());
    for (const auto& [s, i] : scored) order.push_back(i);
    return order;
}

// Argmax of the metric score; an empty ranking (all baselines degenerate
// under acc_npsq) falls back to index 0, consistent with the tie-break.
inline int predict(MetricKind metric, const ChoiceScores& cs) {
    if (cs.choices.size() < 2)
        throw Error(Errc::ValidationError, "instance '" + cs.instance_id +
                                               "': need >= 2 scored choices");
    auto order = ranked_choices(metric, cs);
    return order.empty() ? 0 : order[0];
}

// Component differences between the top two ranked choices. Fewer than two
// rankable choices yields (0, 0), which never counts as choice-sensitive.
inline std::pair<double, double> deltas_top_two(MetricKind metric,
                                                const ChoiceScores& cs) {
    auto order = ranked_choices(metric, cs);
    if (order.size() < 2) return {0.0, 0.0};
    auto [c1, q1] = decompose(metric, cs, order[0]);
    auto [c2, q2] = decompose(metric, cs, order[1]);
    return {c1 - c2, q1 - q2};
}

// --- per-instance outcome ------------------------------------------------------

struct MetricOutcome {
    int predicted = 0;
    bool correct = false;
    double delta_choice = 0.0;
    double delta_question = 0.0;
    bool choice_sensitive = false; // delta_choice > delta_question, strict
    int degenerate_choices = 0;    // excluded from acc_npsq ranking
};

struct InstanceResult {
    std::string id;
    int answer_index = 0;
    std::map<MetricKind, MetricOutcome> metrics;
};

// (ByQuestion | ByChoice) x (Correct | Incorrect)
enum class AttributionCell {
    ByQuestionCorrect,
    ByQuestionIncorrect,
    ByChoiceCorrect,
    ByChoiceIncorrect,
};

inline AttributionCell attribute(const MetricOutcome& o) {
    if (o.choice_sensitive)
        return o.correct ? AttributionCell::ByChoiceCorrect
                         : AttributionCell::ByChoiceIncorrect;
    return o.correct ? AttributionCell::ByQuestionCorrect
                     : AttributionCell::ByQuestionIncorrect;
}

inline const char* attribution_name(AttributionCell c) {
    switch (c) {
        case AttributionCell::ByQuestionCorrect: return "by_question_correct";
        case AttributionCell::ByQuestionIncorrect: return "by_question_incorrect";
        case AttributionCell::ByChoiceCorrect: return "by_choice_correct";
        case AttributionCell::ByChoiceIncorrect: return "by_choice_incorrect";
    }
    return "?";
}

inline MetricOutcome evaluate_metric(MetricKind metric, const ChoiceScores& cs) {
    MetricOutcome o;
    o.predicted = predict(metric, cs);
    o.correct = (o.predicted == cs.answer_index);
    auto [dc, dq] = deltas_top_two(metric, cs);
    o.delta_choice = dc;
    o.delta_question = dq;
    o.choice_sensitive = dc > dq;
    if (metric == MetricKind::AccNpsq)
        for (const ChoiceScore& c : cs.choices)
            if (degenerate_baseline(c)) ++o.degenerate_choices;
    return o;
}

inline InstanceResult evaluate_instance_scores(const ChoiceScores& cs,
                                               const std::vector<MetricKind>& metrics) {
    InstanceResult r;
    r.id = cs.instance_id;
    r.answer_index = cs.answer_index;
    for (MetricKind m : metrics) r.metrics[m] = evaluate_metric(m, cs);
    return r;
}

// --- aggregates over result sets ------------------------------------------------

inline const MetricOutcome& outcome_for(const InstanceResult& r, MetricKind m) {
    auto it = r.metrics.find(m);
    if (it == r.metrics.end())
        throw Error(Errc::ConfigError, "instance '" + r.id + "' was not evaluated under " +
                                           metric_name(m));
    return it->second;
}

// Mean of the per-instance choice-sensitivity indicator.
inline double choice_sensitivity(const std::vector<InstanceResult>& results,
                                 MetricKind metric) {
    if (results.empty())
        throw Error(Errc::EmptyResultSet, "choice_sensitivity over no results");
    std::size_t sensitive = 0;
    for (const InstanceResult& r : results)
        if (outcome_for(r, metric).choice_sensitive) ++sensitive;
    return static_cast<double>(sensitive) / static_cast<double>(results.size());
}

inline double accuracy(const std::vector<InstanceResult>& results, MetricKind metric) {
    if (results.empty())
        throw Error(Errc::EmptyResultSet, "accuracy over no results");
    std::size_t correct = 0;
    for (const InstanceResult& r : results)
        if (outcome_for(r, metric).correct) ++correct;
    return static_cast<double>(correct) / static_cast<double>(results.size());
}

} // namespace qshift
