#include "judgekit/analytics.hpp"

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "judgekit/errors.hpp"

namespace judgekit {

namespace {

Vote flip(Vote v) {
    if (v == Vote::A) return Vote::B;
    if (v == Vote::B) return Vote::A;
    return Vote::Tie;
}

constexpr const char* kMajoritySuffix = "-majority";

bool is_majority_type(const std::string& type) {
    return type.size() > std::char_traits<char>::length(kMajoritySuffix) &&
           type.ends_with(kMajoritySuffix);
}

std::string majority_base(const std::string& type) {
    return type.substr(0, type.size() - std::char_traits<char>::length(kMajoritySuffix));
}

long long reduce2(long long& num, long long& den) {
    const long long g = std::gcd(num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
    return g;
}

__int128 gcd128(__int128 a, __int128 b) {
    if (a < 0) a = -a;
    while (b != 0) {
        const __int128 t = a % b;
        a = b;
        b = t;
    }
    return a;
}

void reduce128(__int128& num, __int128& den) {
    const __int128 g = gcd128(num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
}

} // namespace

// ---------------------------------------------------------------------------
// VoteTable
// ---------------------------------------------------------------------------

void VoteTable::add(VoteRecord record) {
    if (record.model_a.empty() || record.model_b.empty())
        throw InputError("vote record with empty model name (question " +
                         std::to_string(record.question_id) + ")");
    if (record.model_a == record.model_b)
        throw InputError("vote record compares a model against itself: " + record.model_a);
    Vote vote = record.vote;
    std::string a = record.model_a, b = record.model_b;
    if (b < a) {
        std::swap(a, b);
        vote = flip(vote);
    }
    VoteKey key{record.question_id, record.turn_index, std::move(a), std::move(b)};
    auto& per_judge = cells_[key][record.judge_type];
    for (const auto& existing : per_judge)
        if (existing.judge_id == record.judge_id) {
            ++duplicates_;
            break;
        }
    per_judge.push_back(IndexedVote{record.judge_id, vote});
}

VoteTable VoteTable::from_records(const std::vector<VoteRecord>& records) {
    VoteTable table;
    for (const auto& r : records) table.add(r);
    return table;
}

MatchVotes votes_from_matches(const std::vector<MatchResult>& matches,
                              const std::string& judge_type, const std::string& judge_id) {
    MatchVotes out;
    for (const auto& m : matches) {
        Vote vote = Vote::Tie;
        switch (m.outcome) {
        case MatchOutcome::WinA: vote = Vote::A; break;
        case MatchOutcome::WinB: vote = Vote::B; break;
        case MatchOutcome::TieBoth:
        case MatchOutcome::TieInconsistent: vote = Vote::Tie; break;
        case MatchOutcome::Error: ++out.skipped_errors; continue;
        }
        VoteRecord r;
        r.question_id = m.question_id;
        r.turn_index = m.turn_index;
        r.model_a = m.model_a;
        r.model_b = m.model_b;
        r.judge_type = judge_type;
        r.judge_id = judge_id.empty() ? judge_type : judge_id;
        r.vote = vote;
        out.votes.push_back(std::move(r));
    }
    return out;
}

VoteTable VoteTable::from_matches(const std::vector<MatchResult>& matches,
                                  const std::string& judge_type, const std::string& judge_id) {
    auto converted = votes_from_matches(matches, judge_type, judge_id);
    VoteTable table = from_records(converted.votes);
    table.skipped_errors_ = converted.skipped_errors;
    return table;
}

std::vector<std::string> VoteTable::judge_types() const {
    std::set<std::string> types;
    for (const auto& [key, cell] : cells_)
        for (const auto& [type, votes] : cell) types.insert(type);
    return {types.begin(), types.end()};
}

std::vector<std::pair<std::string, std::string>> VoteTable::model_pairs() const {
    std::set<std::pair<std::string, std::string>> pairs;
    for (const auto& [key, cell] : cells_) pairs.insert({key.model_a, key.model_b});
    return {pairs.begin(), pairs.end()};
}

size_t VoteTable::vote_total() const {
    size_t n = 0;
    for (const auto& [key, cell] : cells_)
        for (const auto& [type, votes] : cell) n += votes.size();
    return n;
}

// ---------------------------------------------------------------------------
// Agreement
// ---------------------------------------------------------------------------

std::string human_majority(const VoteTable& table, const std::string& base_type) {
    for (const auto& [key, cell] : table.cells())
        if (cell.contains(base_type)) return base_type + kMajoritySuffix;
    throw InputError("judge type not present in vote table: " + base_type);
}

std::map<VoteKey, WeightedVote> majority_votes(const VoteTable& table,
                                               const std::string& base_type,
                                               AgreementSetup setup) {
    std::map<VoteKey, WeightedVote> out;
    for (const auto& [key, cell] : table.cells()) {
        auto it = cell.find(base_type);
        if (it == cell.end()) continue;
        std::array<long long, 3> counts{0, 0, 0};
        for (const auto& vote : it->second) {
            if (setup == AgreementSetup::S2 && vote.vote == Vote::Tie) continue;
            ++counts[static_cast<int>(vote.vote)];
        }
        const long long top = *std::max_element(counts.begin(), counts.end());
        if (top == 0) continue; // every vote dropped
        WeightedVote wv;
        wv.judge_id = base_type + kMajoritySuffix;
        for (int o = 0; o < 3; ++o)
            if (counts[o] == top) {
                wv.mass[o] = 1;
                ++wv.den;
            }
        --wv.den; // den started at 1
        // An even split spreads one unit of mass over the tied options.
        out.emplace(key, std::move(wv));
    }
    return out;
}

namespace {

// Per-cell list of stances for one (possibly "-majority") judge type.
std::map<VoteKey, std::vector<WeightedVote>> stances_for(const VoteTable& table,
                                                         const std::string& type,
                                                         AgreementSetup setup) {
    std::map<VoteKey, std::vector<WeightedVote>> out;
    if (is_majority_type(type)) {
        for (auto& [key, wv] : majority_votes(table, majority_base(type), setup))
            out[key].push_back(std::move(wv));
        return out;
    }
    for (const auto& [key, cell] : table.cells()) {
        auto it = cell.find(type);
        if (it == cell.end()) continue;
        std::vector<WeightedVote> stances;
        for (const auto& vote : it->second) {
            if (setup == AgreementSetup::S2 && vote.vote == Vote::Tie) continue;
            WeightedVote wv;
            wv.judge_id = vote.judge_id;
            wv.mass[static_cast<int>(vote.vote)] = 1;
            stances.push_back(std::move(wv));
        }
        if (!stances.empty()) out.emplace(key, std::move(stances));
    }
    return out;
}

// Expected agreement of two stances, in 1/36 units (both dens divide 6, so
// every pairwise product den divides 36 exactly).
long long pair_units(const WeightedVote& x, const WeightedVote& y) {
    long long dot = 0;
    for (int o = 0; o < 3; ++o) dot += x.mass[o] * y.mass[o];
    return dot * (36 / (x.den * y.den));
}

// How many raw votes of the two base types sit in the contributing cells.
long long raw_votes_in(const VoteTable& table, const VoteKey& key,
                       const std::set<std::string>& base_types) {
    auto cell_it = table.cells().find(key);
    if (cell_it == table.cells().end()) return 0;
    long long n = 0;
    for (const auto& base : base_types) {
        auto it = cell_it->second.find(base);
        if (it != cell_it->second.end()) n += static_cast<long long>(it->second.size());
    }
    return n;
}

} // namespace

AgreementReport agreement(const VoteTable& table, const std::string& type_x,
                          const std::string& type_y, AgreementSetup setup,
                          const AgreementOptions& options) {
    const auto sx = stances_for(table, type_x, setup);
    const auto sy = stances_for(table, type_y, setup);
    const bool same_type = type_x == type_y;
    std::set<std::string> bases{is_majority_type(type_x) ? majority_base(type_x) : type_x,
                                is_majority_type(type_y) ? majority_base(type_y) : type_y};

    AgreementReport report;
    report.judge_type_x = type_x;
    report.judge_type_y = type_y;
    report.setup = setup;
    report.random_baseline = setup == AgreementSetup::S2 ? 0.5 : 1.0 / 3.0;

    long long total_units = 0, total_pairs = 0;
    // Exact running sum of per-cell fractions for the averaged variant.
    __int128 avg_num = 0, avg_den = 1;
    long long avg_cells = 0;

    for (const auto& [key, xs] : sx) {
        auto it = sy.find(key);
        if (it == sy.end()) continue;
        const auto& ys = it->second;
        long long cell_units = 0, cell_pairs = 0;
        if (same_type) {
            for (size_t i = 0; i < xs.size(); ++i)
                for (size_t j = i + 1; j < xs.size(); ++j) {
                    if (xs[i].judge_id == xs[j].judge_id) continue;
                    cell_units += pair_units(xs[i], xs[j]);
                    ++cell_pairs;
                }
        } else {
            for (const auto& x : xs)
                for (const auto& y : ys) {
                    cell_units += pair_units(x, y);
                    ++cell_pairs;
                }
        }
        if (cell_pairs == 0) continue;
        total_units += cell_units;
        total_pairs += cell_pairs;
        ++report.cell_count;
        report.raw_vote_count += raw_votes_in(table, key, bases);
        if (options.per_question_average) {
            long long num = cell_units, den = 36 * cell_pairs;
            reduce2(num, den);
            // avg += num/den, exactly.
            const __int128 limit = static_cast<__int128>(1) << 100;
            avg_num = avg_num * den + static_cast<__int128>(num) * avg_den;
            avg_den = avg_den * den;
            if (avg_den > limit || avg_num > limit)
                throw Error("per-question agreement average overflowed exact arithmetic");
            reduce128(avg_num, avg_den);
            ++avg_cells;
        }
    }

    if (total_pairs == 0)
        throw InputError("no overlapping votes between judge types '" + type_x + "' and '" +
                         type_y + "'");

    report.vote_count = total_pairs;
    if (options.per_question_average) {
        // average of per-cell agreements: (avg_num/avg_den) / avg_cells
        __int128 num = avg_num, den = avg_den * avg_cells;
        reduce128(num, den);
        if (num > std::numeric_limits<long long>::max() ||
            den > std::numeric_limits<long long>::max())
            throw Error("per-question agreement average overflowed exact arithmetic");
        report.agreement_num = static_cast<long long>(num);
        report.agreement_den = static_cast<long long>(den);
    } else {
        long long num = total_units, den = 36 * total_pairs;
        reduce2(num, den);
        report.agreement_num = num;
        report.agreement_den = den;
    }
    report.agreement =
        static_cast<double>(report.agreement_num) / static_cast<double>(report.agreement_den);
    return report;
}

AgreementReport agreement_bruteforce(const VoteTable& table, const std::string& type_x,
                                     const std::string& type_y, AgreementSetup setup,
                                     const AgreementOptions& options) {
    // Independent floating-point recomputation: stances are probability
    // vectors, majority recomputed inline, agreement summed as doubles.
    auto stance_list = [&](const std::string& type,
                           const VoteKey& key) -> std::vector<std::pair<std::string, std::array<double, 3>>> {
        std::vector<std::pair<std::string, std::array<double, 3>>> out;
        const auto cell_it = table.cells().find(key);
        if (cell_it == table.cells().end()) return out;
        const std::string base = is_majority_type(type) ? majority_base(type) : type;
        const auto it = cell_it->second.find(base);
        if (it == cell_it->second.end()) return out;
        std::vector<Vote> kept;
        for (const auto& v : it->second)
            if (!(setup == AgreementSetup::S2 && v.vote == Vote::Tie)) kept.push_back(v.vote);
        if (is_majority_type(type)) {
            if (kept.empty()) return out;
            std::array<int, 3> counts{0, 0, 0};
            for (Vote v : kept) ++counts[static_cast<int>(v)];
            const int top = *std::max_element(counts.begin(), counts.end());
            int tied = 0;
            for (int c : counts) tied += c == top;
            std::array<double, 3> p{0, 0, 0};
            for (int o = 0; o < 3; ++o)
                if (counts[o] == top) p[o] = 1.0 / tied;
            out.push_back({type, p});
            return out;
        }
        size_t kept_i = 0;
        for (const auto& v : it->second) {
            if (setup == AgreementSetup::S2 && v.vote == Vote::Tie) continue;
            std::array<double, 3> p{0, 0, 0};
            p[static_cast<int>(kept[kept_i++])] = 1.0;
            out.push_back({v.judge_id, p});
        }
        return out;
    };

    const bool same_type = type_x == type_y;
    double total = 0.0;
    long long total_pairs = 0;
    double avg_sum = 0.0;
    long long avg_cells = 0;
    AgreementReport report;
    report.judge_type_x = type_x;
    report.judge_type_y = type_y;
    report.setup = setup;
    report.random_baseline = setup == AgreementSetup::S2 ? 0.5 : 1.0 / 3.0;
    std::set<std::string> bases{is_majority_type(type_x) ? majority_base(type_x) : type_x,
                                is_majority_type(type_y) ? majority_base(type_y) : type_y};

    for (const auto& [key, cell] : table.cells()) {
        const auto xs = stance_list(type_x, key);
        const auto ys = stance_list(type_y, key);
        if (xs.empty() || ys.empty()) continue;
        double cell_sum = 0.0;
        long long cell_pairs = 0;
        if (same_type) {
            for (size_t i = 0; i < xs.size(); ++i)
                for (size_t j = i + 1; j < xs.size(); ++j) {
                    if (xs[i].first == xs[j].first) continue;
                    for (int o = 0; o < 3; ++o) cell_sum += xs[i].second[o] * xs[j].second[o];
                    ++cell_pairs;
                }
        } else {
            for (const auto& x : xs)
                for (const auto& y : ys) {
                    for (int o = 0; o < 3; ++o) cell_sum += x.second[o] * y.second[o];
                    ++cell_pairs;
                }
        }
        if (cell_pairs == 0) continue;
        total += cell_sum;
        total_pairs += cell_pairs;
        ++report.cell_count;
        report.raw_vote_count += raw_votes_in(table, key, bases);
        avg_sum += cell_sum / cell_pairs;
        ++avg_cells;
    }

    if (total_pairs == 0)
        throw InputError("no overlapping votes between judge types '" + type_x + "' and '" +
                         type_y + "'");
    report.vote_count = total_pairs;
    report.agreement =
        options.per_question_average ? avg_sum / avg_cells : total / total_pairs;
    // No exact fraction on this path; leave num/den at the 0/1 defaults.
    return report;
}

// ---------------------------------------------------------------------------
// Score conversion, win rates, bench score
// ---------------------------------------------------------------------------

ScoresToVotesResult scores_to_votes(const std::vector<SingleGrade>& grades,
                                    const std::string& judge_type) {
    // Last grade wins when the same (question, turn, model) is graded twice.
    std::map<std::pair<int64_t, int>, std::map<std::string, std::optional<int>>> by_cell;
    for (const auto& g : grades)
        by_cell[{g.question_id, g.turn_index}][g.model_id] = g.score;

    ScoresToVotesResult result;
    for (const auto& [cell, models] : by_cell) {
        for (auto ia = models.begin(); ia != models.end(); ++ia)
            for (auto ib = std::next(ia); ib != models.end(); ++ib) {
                if (!ia->second || !ib->second) {
                    ++result.skipped_cells;
                    continue;
                }
                VoteRecord r;
                r.question_id = cell.first;
                r.turn_index = cell.second;
                r.model_a = ia->first;
                r.model_b = ib->first;
                r.judge_type = judge_type;
                r.judge_id = judge_type;
                r.vote = *ia->second > *ib->second ? Vote::A
                         : *ia->second < *ib->second ? Vote::B
                                                     : Vote::Tie;
                result.votes.push_back(std::move(r));
            }
    }
    return result;
}

namespace {

struct Wlt {
    long long w = 0, l = 0, t = 0;
};

WinRateReport finish_win_rate(const std::string& model, bool include_ties,
                              const std::map<std::string, Wlt>& per_opponent) {
    WinRateReport report;
    report.model = model;
    report.include_ties = include_ties;
    double sum = 0.0;
    for (const auto& [opponent, wlt] : per_opponent) {
        report.wins += wlt.w;
        report.losses += wlt.l;
        report.ties += wlt.t;
        const long long decided = wlt.w + wlt.l;
        const long long all = decided + wlt.t;
        if (include_ties) {
            if (all == 0) {
                report.excluded_opponents.push_back(opponent);
                continue;
            }
            report.per_opponent[opponent] = (wlt.w + 0.5 * wlt.t) / all;
        } else {
            if (decided == 0) {
                report.excluded_opponents.push_back(opponent);
                continue;
            }
            report.per_opponent[opponent] = static_cast<double>(wlt.w) / decided;
        }
        sum += report.per_opponent[opponent];
    }
    if (!report.per_opponent.empty()) report.average = sum / report.per_opponent.size();
    return report;
}

} // namespace

WinRateReport win_rate(const std::vector<MatchResult>& matches, const std::string& model,
                       bool include_ties) {
    std::map<std::string, Wlt> per_opponent;
    bool seen = false;
    for (const auto& m : matches) {
        if (m.model_a != model && m.model_b != model) continue;
        seen = true;
        if (m.outcome == MatchOutcome::Error) continue; // not a played game
        const bool as_a = m.model_a == model;
        auto& wlt = per_opponent[as_a ? m.model_b : m.model_a];
        switch (m.outcome) {
        case MatchOutcome::WinA: (as_a ? wlt.w : wlt.l)++; break;
        case MatchOutcome::WinB: (as_a ? wlt.l : wlt.w)++; break;
        case MatchOutcome::TieBoth:
        case MatchOutcome::TieInconsistent: ++wlt.t; break;
        case MatchOutcome::Error: break;
        }
    }
    if (!seen) throw InputError("no matches involve model '" + model + "'");
    return finish_win_rate(model, include_ties, per_opponent);
}

WinRateReport win_rate(const VoteTable& table, const std::string& judge_type,
                       const std::string& model, bool include_ties) {
    std::map<std::string, Wlt> per_opponent;
    bool seen = false;
    for (const auto& [key, cell] : table.cells()) {
        if (key.model_a != model && key.model_b != model) continue;
        const auto it = cell.find(judge_type);
        if (it == cell.end()) continue;
        seen = true;
        const bool as_a = key.model_a == model;
        auto& wlt = per_opponent[as_a ? key.model_b : key.model_a];
        for (const auto& vote : it->second) {
            if (vote.vote == Vote::Tie)
                ++wlt.t;
            else if ((vote.vote == Vote::A) == as_a)
                ++wlt.w;
            else
                ++wlt.l;
        }
    }
    if (!seen)
        throw InputError("no '" + judge_type + "' votes involve model '" + model + "'");
    return finish_win_rate(model, include_ties, per_opponent);
}

std::map<Category, WinRateReport> category_win_rate(
    const std::vector<MatchResult>& matches, const std::string& model,
    const std::map<int64_t, Category>& question_categories, bool include_ties) {
    std::map<Category, std::vector<MatchResult>> by_category;
    for (const auto& m : matches) {
        const auto it = question_categories.find(m.question_id);
        if (it == question_categories.end())
            throw InputError("no category known for question " + std::to_string(m.question_id));
        by_category[it->second].push_back(m);
    }
    std::map<Category, WinRateReport> out;
    for (const auto& [category, subset] : by_category) {
        const bool involved = std::any_of(subset.begin(), subset.end(), [&](const MatchResult& m) {
            return m.model_a == model || m.model_b == model;
        });
        if (!involved) continue;
        out.emplace(category, win_rate(subset, model, include_ties));
    }
    return out;
}

BenchScore mt_bench_score(const std::vector<SingleGrade>& grades, const std::string& model,
                          const std::map<int64_t, Category>& question_categories) {
    BenchScore score;
    score.model = model;
    double sum = 0.0;
    std::map<int, std::pair<double, long long>> turn_acc;
    std::map<std::string, std::pair<double, long long>> cat_acc;
    for (const auto& g : grades) {
        if (g.model_id != model) continue;
        if (!g.score) {
            ++score.format_errors;
            continue;
        }
        ++score.valid_grades;
        sum += *g.score;
        auto& t = turn_acc[g.turn_index];
        t.first += *g.score;
        ++t.second;
        const auto it = question_categories.find(g.question_id);
        if (it != question_categories.end()) {
            auto& c = cat_acc[std::string(to_string(it->second))];
            c.first += *g.score;
            ++c.second;
        }
    }
    if (score.valid_grades == 0)
        throw InputError("no valid grades for model '" + model + "'");
    score.overall = sum / score.valid_grades;
    for (const auto& [turn, acc] : turn_acc) score.per_turn[turn] = acc.first / acc.second;
    for (const auto& [cat, acc] : cat_acc) score.per_category[cat] = acc.first / acc.second;
    return score;
}

void to_json(nlohmann::json& j, const WinRateReport& r) {
    j = nlohmann::json{{"model", r.model},
                       {"include_ties", r.include_ties},
                       {"per_opponent", r.per_opponent},
                       {"excluded_opponents", r.excluded_opponents},
                       {"average", r.average},
                       {"wins", r.wins},
                       {"losses", r.losses},
                       {"ties", r.ties}};
}

void to_json(nlohmann::json& j, const BenchScore& s) {
    nlohmann::json per_turn = nlohmann::json::object();
    for (const auto& [turn, mean] : s.per_turn) per_turn[std::to_string(turn)] = mean;
    j = nlohmann::json{{"model", s.model},
                       {"overall", s.overall},
                       {"per_turn", per_turn},
                       {"per_category", s.per_category},
                       {"valid_grades", s.valid_grades},
                       {"format_errors", s.format_errors}};
}

void to_json(nlohmann::json& j, const GapPoint& p) {
    j = nlohmann::json{{"model_a", p.model_a},
                       {"model_b", p.model_b},
                       {"win_rate_diff", p.win_rate_diff},
                       {"agreement", p.agreement},
                       {"pairs", p.pairs}};
}

std::vector<GapPoint> agreement_vs_gap(const VoteTable& table, const std::string& type_x,
                                       const std::string& type_y) {
    // Rebuild a one-pair table per canonical model pair, then reuse the
    // headline machinery on it.
    std::map<std::pair<std::string, std::string>, VoteTable> per_pair;
    for (const auto& [key, cell] : table.cells())
        for (const auto& [type, votes] : cell)
            for (const auto& vote : votes) {
                VoteRecord r;
                r.question_id = key.question_id;
                r.turn_index = key.turn_index;
                r.model_a = key.model_a;
                r.model_b = key.model_b;
                r.judge_type = type;
                r.judge_id = vote.judge_id;
                r.vote = vote.vote;
                per_pair[{key.model_a, key.model_b}].add(std::move(r));
            }

    const std::string base_y = is_majority_type(type_y) ? majority_base(type_y) : type_y;
    std::vector<GapPoint> points;
    for (const auto& [pair, sub] : per_pair) {
        AgreementReport rep;
        try {
            rep = agreement(sub, type_x, type_y, AgreementSetup::S2);
        } catch (const InputError&) {
            continue; // no overlap on this pair
        }
        long long wa = 0, wb = 0;
        for (const auto& [key, cell] : sub.cells()) {
            const auto it = cell.find(base_y);
            if (it == cell.end()) continue;
            for (const auto& vote : it->second) {
                if (vote.vote == Vote::A) ++wa;
                if (vote.vote == Vote::B) ++wb;
            }
        }
        if (wa + wb == 0) continue;
        GapPoint p;
        p.model_a = pair.first;
        p.model_b = pair.second;
        p.win_rate_diff = static_cast<double>(std::llabs(wa - wb)) / (wa + wb);
        p.agreement = rep.agreement;
        p.pairs = rep.vote_count;
        points.push_back(std::move(p));
    }
    return points;
}

} // namespace judgekit
