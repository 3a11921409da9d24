#pragma once

#include <array>
#include <compare>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "judgekit/types.hpp"

namespace judgekit {

// ---------------------------------------------------------------------------
// VoteTable
// ---------------------------------------------------------------------------

struct VoteKey {
    int64_t question_id = 0;
    int turn_index = 1;
    std::string model_a;
    std::string model_b;

    auto operator<=>(const VoteKey&) const = default;
};

struct IndexedVote {
    std::string judge_id;
    Vote vote = Vote::Tie;

    bool operator==(const IndexedVote&) const = default;
};

// Votes indexed by (question, turn, model pair) and judge type. Model pairs
// are canonicalized to lexicographic order with votes relabeled, so the same
// physical comparison always lands in the same cell.
class VoteTable {
public:
    using Cell = std::map<std::string, std::vector<IndexedVote>>;

    void add(VoteRecord record);
    static VoteTable from_records(const std::vector<VoteRecord>& records);
    // Match outcomes become votes: WinA/WinB -> A/B, both tie flavors -> Tie
    // (inconsistent counts as tie), Error outcomes skipped (and counted).
    static VoteTable from_matches(const std::vector<MatchResult>& matches,
                                  const std::string& judge_type, const std::string& judge_id = "");

    const std::map<VoteKey, Cell>& cells() const { return cells_; }
    std::vector<std::string> judge_types() const;
    std::vector<std::pair<std::string, std::string>> model_pairs() const;
    // Same individual voting twice on one cell (kept, but worth flagging).
    long long duplicate_count() const { return duplicates_; }
    long long skipped_error_matches() const { return skipped_errors_; }
    size_t vote_total() const;

private:
    std::map<VoteKey, Cell> cells_;
    long long duplicates_ = 0;
    long long skipped_errors_ = 0;
};

// ---------------------------------------------------------------------------
// Agreement
// ---------------------------------------------------------------------------

// A judge's stance on one cell, as (possibly fractional) mass over {A, B,
// Tie}. Plain votes are one-hot with den=1; even-split majority votes spread
// mass over the tied-top options (den = number of tied options), so matching
// one of two tied options counts 1/2, one of three counts 1/3.
struct WeightedVote {
    std::string judge_id;
    std::array<long long, 3> mass{0, 0, 0}; // A, B, Tie
    long long den = 1;

    bool operator==(const WeightedVote&) const = default;
};

// The "<base>-majority" synthetic judge type name for use in agreement();
// validates that base_type exists in the table.
std::string human_majority(const VoteTable& table, const std::string& base_type);

// Majority stances per cell for a base type under a setup. S2 drops tie votes
// before the majority is taken; cells with no remaining votes are absent.
std::map<VoteKey, WeightedVote> majority_votes(const VoteTable& table,
                                               const std::string& base_type,
                                               AgreementSetup setup);

struct AgreementOptions {
    // Off: every comparison pair counts once globally (pair-weighted).
    // On: cells are averaged with equal weight regardless of vote counts.
    bool per_question_average = false;
};

// Probability that randomly selected non-identical individuals of the two
// types agree. Type names ending in "-majority" resolve to the majority view
// of the base type. Exact arithmetic; see AgreementReport for the fraction.
AgreementReport agreement(const VoteTable& table, const std::string& type_x,
                          const std::string& type_y, AgreementSetup setup,
                          const AgreementOptions& options = {});

// Literal nested-loop enumeration over all cross pairs; the oracle the fast
// path is tested against.
AgreementReport agreement_bruteforce(const VoteTable& table, const std::string& type_x,
                                     const std::string& type_y, AgreementSetup setup,
                                     const AgreementOptions& options = {});

// ---------------------------------------------------------------------------
// Score conversion, win rates, bench score
// ---------------------------------------------------------------------------

struct ScoresToVotesResult {
    std::vector<VoteRecord> votes;
    long long skipped_cells = 0; // cells with a format-error grade on either side
};

// Pairs up grades per (question, turn) across models: higher score wins.
ScoresToVotesResult scores_to_votes(const std::vector<SingleGrade>& grades,
                                    const std::string& judge_type);

struct MatchVotes {
    std::vector<VoteRecord> votes;
    long long skipped_errors = 0; // Error outcomes carry no preference
};

// The vote-record view of match outcomes that VoteTable::from_matches indexes.
MatchVotes votes_from_matches(const std::vector<MatchResult>& matches,
                              const std::string& judge_type, const std::string& judge_id = "");

struct WinRateReport {
    std::string model;
    bool include_ties = false;
    // opponent -> rate; opponents with zero decided games are listed in
    // excluded_opponents instead (exclude-ties convention only).
    std::map<std::string, double> per_opponent;
    std::vector<std::string> excluded_opponents;
    double average = 0.0; // unweighted mean over per_opponent
    long long wins = 0, losses = 0, ties = 0;
};

WinRateReport win_rate(const std::vector<MatchResult>& matches, const std::string& model,
                       bool include_ties = false);
WinRateReport win_rate(const VoteTable& table, const std::string& judge_type,
                       const std::string& model, bool include_ties = false);

// Per-category win rate of one model.
std::map<Category, WinRateReport> category_win_rate(
    const std::vector<MatchResult>& matches, const std::string& model,
    const std::map<int64_t, Category>& question_categories, bool include_ties = false);

struct BenchScore {
    std::string model;
    double overall = 0.0; // mean over every valid turn score
    std::map<int, double> per_turn;
    std::map<std::string, double> per_category;
    long long valid_grades = 0;
    long long format_errors = 0;
};

// Mean single-answer score over all graded turns (the 160 = 80 x 2 layout).
BenchScore mt_bench_score(const std::vector<SingleGrade>& grades, const std::string& model,
                          const std::map<int64_t, Category>& question_categories = {});

struct GapPoint {
    std::string model_a;
    std::string model_b;
    double win_rate_diff = 0.0; // |win rate A - win rate B| from type_y votes
    double agreement = 0.0;     // S2 agreement between the types on this pair
    long long pairs = 0;        // comparison pairs behind the agreement value
};

// Per-model-pair breakdown: non-tie agreement between the two types against
// the win-rate gap measured from type_y's votes.
std::vector<GapPoint> agreement_vs_gap(const VoteTable& table, const std::string& type_x,
                                       const std::string& type_y);

void to_json(nlohmann::json& j, const WinRateReport& r);
void to_json(nlohmann::json& j, const BenchScore& s);
void to_json(nlohmann::json& j, const GapPoint& p);

} // namespace judgekit
