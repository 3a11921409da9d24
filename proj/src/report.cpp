#include "judgekit/report.hpp"

#include <cstdio>
#include <vector>

#include "judgekit/errors.hpp"
#include "judgekit/types.hpp"

namespace judgekit {

namespace {

std::string fixed(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
    return buf;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

std::string csv_cell(const std::string& cell) {
    if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
    std::string quoted = "\"";
    for (char c : cell) {
        if (c == '"') quoted += '"';
        quoted += c;
    }
    quoted += '"';
    return quoted;
}

std::string md_cell(const std::string& cell) {
    std::string out;
    for (char c : cell) {
        if (c == '|') out += '\\';
        if (c == '\n') {
            out += ' ';
            continue;
        }
        out += c;
    }
    return out;
}

std::string render(const Table& table, std::string_view format) {
    std::string out;
    if (format == "csv") {
        for (size_t i = 0; i < table.header.size(); ++i) {
            if (i) out += ',';
            out += csv_cell(table.header[i]);
        }
        out += '\n';
        for (const auto& row : table.rows) {
            for (size_t i = 0; i < row.size(); ++i) {
                if (i) out += ',';
                out += csv_cell(row[i]);
            }
            out += '\n';
        }
        return out;
    }
    if (format == "markdown") {
        out += '|';
        for (const auto& h : table.header) out += ' ' + md_cell(h) + " |";
        out += "\n|";
        for (size_t i = 0; i < table.header.size(); ++i) out += " --- |";
        out += '\n';
        for (const auto& row : table.rows) {
            out += '|';
            for (const auto& cell : row) out += ' ' + md_cell(cell) + " |";
            out += '\n';
        }
        return out;
    }
    throw InputError("unknown report format '" + std::string(format) + "' (csv or markdown)");
}

Table position_bias_table(const nlohmann::json& rows) {
    Table t;
    t.header = {"Group", "Consistency (%)", "Biased toward first (%)",
                "Biased toward second (%)", "Error (%)"};
    for (const auto& row : rows) {
        const auto report = row.at("report").get<PositionBiasReport>();
        t.rows.push_back({row.at("group").get<std::string>(), fixed(report.consistency_pct, 1),
                          fixed(report.biased_first_pct, 1), fixed(report.biased_second_pct, 1),
                          fixed(report.error_pct, 1)});
    }
    return t;
}

Table agreement_table(const nlohmann::json& rows) {
    Table t;
    t.header = {"Judge X",  "Judge Y", "Setup", "Agreement (%)", "Exact",
                "Pairs",    "Cells",   "Votes", "Baseline (%)"};
    for (const auto& row : rows) {
        const auto r = row.get<AgreementReport>();
        t.rows.push_back({r.judge_type_x, r.judge_type_y,
                          std::string(to_string(r.setup)), fixed(100.0 * r.agreement, 1),
                          std::to_string(r.agreement_num) + "/" + std::to_string(r.agreement_den),
                          std::to_string(r.vote_count), std::to_string(r.cell_count),
                          std::to_string(r.raw_vote_count), fixed(100.0 * r.random_baseline, 1)});
    }
    return t;
}

Table winrate_table(const nlohmann::json& rows) {
    Table t;
    t.header = {"Model", "Opponent", "Win rate (%)", "Wins", "Losses", "Ties"};
    for (const auto& row : rows) {
        const auto model = row.at("model").get<std::string>();
        for (const auto& [opponent, rate] : row.at("per_opponent").items())
            t.rows.push_back(
                {model, opponent, fixed(100.0 * rate.get<double>(), 1), "", "", ""});
        for (const auto& opponent : row.at("excluded_opponents"))
            t.rows.push_back({model, opponent.get<std::string>(), "n/a", "", "", ""});
        t.rows.push_back({model, "(average)", fixed(100.0 * row.at("average").get<double>(), 1),
                          std::to_string(row.at("wins").get<long long>()),
                          std::to_string(row.at("losses").get<long long>()),
                          std::to_string(row.at("ties").get<long long>())});
    }
    return t;
}

Table bench_score_table(const nlohmann::json& rows) {
    Table t;
    t.header = {"Model", "Score", "Turn 1", "Turn 2", "Valid grades", "Format errors"};
    for (const auto& row : rows) {
        const auto& per_turn = row.at("per_turn");
        const auto turn = [&](const char* key) {
            return per_turn.contains(key) ? fixed(per_turn.at(key).get<double>(), 2)
                                          : std::string("n/a");
        };
        t.rows.push_back({row.at("model").get<std::string>(),
                          fixed(row.at("overall").get<double>(), 2), turn("1"), turn("2"),
                          std::to_string(row.at("valid_grades").get<long long>()),
                          std::to_string(row.at("format_errors").get<long long>())});
        for (const auto& [category, mean] : row.at("per_category").items())
            t.rows.push_back({row.at("model").get<std::string>() + " / " + category,
                              fixed(mean.get<double>(), 2), "", "", "", ""});
    }
    return t;
}

Table verbosity_table(const nlohmann::json& rows) {
    Table t;
    t.header = {"Judge", "Failures", "N", "Failure rate (%)"};
    for (const auto& row : rows)
        t.rows.push_back({row.value("judge", std::string("judge")),
                          std::to_string(row.at("failures").get<long long>()),
                          std::to_string(row.at("n").get<long long>()),
                          fixed(100.0 * row.at("rate").get<double>(), 1)});
    return t;
}

Table math_failures_table(const nlohmann::json& rows) {
    Table t;
    t.header = {"Mode", "Failures/Games", "Failure rate (%)"};
    for (const auto& row : rows) {
        const auto failures = row.at("failures").get<long long>();
        const auto games = row.at("games").get<long long>();
        const double rate = games ? 100.0 * failures / games : 0.0;
        t.rows.push_back({row.at("mode").get<std::string>(),
                          std::to_string(failures) + "/" + std::to_string(games),
                          fixed(rate, 1)});
    }
    return t;
}

Table calibration_table(const nlohmann::json& rows) {
    Table t;
    t.header = {"Question", "Model", "Outcome", "Pass"};
    for (const auto& row : rows)
        t.rows.push_back({std::to_string(row.at("question_id").get<int64_t>()),
                          row.at("model").get<std::string>(),
                          row.at("outcome").get<std::string>(),
                          row.at("pass").get<bool>() ? "yes" : "no"});
    return t;
}

} // namespace

std::string format_fixed1(double value) { return fixed(value, 1); }

std::string emit_report(const nlohmann::json& bundle, std::string_view format) {
    if (!bundle.is_object() || !bundle.contains("kind"))
        throw InputError("metrics bundle has no 'kind'");
    if (!bundle.contains("rows") || !bundle.at("rows").is_array() || bundle.at("rows").empty())
        throw InputError("empty metrics bundle");
    const auto kind = bundle.at("kind").get<std::string>();
    const auto& rows = bundle.at("rows");
    Table table;
    try {
        if (kind == "position_bias")
            table = position_bias_table(rows);
        else if (kind == "agreement")
            table = agreement_table(rows);
        else if (kind == "winrate")
            table = winrate_table(rows);
        else if (kind == "bench_score")
            table = bench_score_table(rows);
        else if (kind == "verbosity")
            table = verbosity_table(rows);
        else if (kind == "math_failures")
            table = math_failures_table(rows);
        else if (kind == "calibration")
            table = calibration_table(rows);
        else
            throw InputError("unknown metrics bundle kind '" + kind + "'");
    } catch (const nlohmann::json::exception& e) {
        throw InputError("malformed '" + kind + "' bundle: " + e.what());
    }
    return render(table, format);
}

} // namespace judgekit
