#include "judgekit/io.hpp"

#include <fstream>
#include <sstream>

#include "judgekit/errors.hpp"

namespace judgekit {

namespace {

template <typename T>
std::vector<T> read_typed_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open file: " + path.string());
    std::vector<T> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(nlohmann::json::parse(line).get<T>());
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what(),
                             lineno);
        } catch (const ParseError& e) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what(),
                             lineno);
        }
    }
    return out;
}

template <typename T>
void write_typed_jsonl(const std::filesystem::path& path, const std::vector<T>& records) {
    std::string content;
    for (const T& r : records) {
        nlohmann::json j = r;
        content += j.dump();
        content += "\n";
    }
    write_file_if_changed(path, content);
}

} // namespace

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
    return read_typed_jsonl<nlohmann::json>(path);
}

void write_file_if_changed(const std::filesystem::path& path, const std::string& content) {
    if (std::filesystem::exists(path)) {
        std::ifstream in(path, std::ios::binary);
        std::ostringstream existing;
        existing << in.rdbuf();
        if (in && existing.str() == content) return; // already up to date
    }
    if (auto parent = path.parent_path(); !parent.empty())
        std::filesystem::create_directories(parent);
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw StorageError("cannot write " + tmp.string());
        out << content;
        if (!out) throw StorageError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& lines) {
    write_typed_jsonl(path, lines);
}

std::vector<Question> read_questions(const std::filesystem::path& path) {
    return read_typed_jsonl<Question>(path);
}

void write_questions(const std::filesystem::path& path, const std::vector<Question>& questions) {
    write_typed_jsonl(path, questions);
}

std::vector<ModelAnswer> read_answers(const std::filesystem::path& path) {
    return read_typed_jsonl<ModelAnswer>(path);
}

void write_answers(const std::filesystem::path& path, const std::vector<ModelAnswer>& answers) {
    write_typed_jsonl(path, answers);
}

VoteIngest read_votes(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open vote file: " + path.string());
    VoteIngest ingest;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what(),
                             lineno);
        }
        // Normalize field aliases before the typed parse sees the object.
        if (j.contains("model_1") && !j.contains("model_a")) {
            j["model_a"] = j["model_1"];
            j.erase("model_1");
        }
        if (j.contains("model_2") && !j.contains("model_b")) {
            j["model_b"] = j["model_2"];
            j.erase("model_2");
        }
        if (!j.contains("vote"))
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": missing vote",
                             lineno);
        std::string raw_vote = j["vote"].get<std::string>();
        bool both_bad = false;
        std::string vote = raw_vote;
        if (vote == "model_a" || vote == "a") vote = "A";
        if (vote == "model_b" || vote == "b") vote = "B";
        if (vote == "Tie" || vote == "TIE") vote = "tie";
        if (vote == "both_bad" || vote == "bothbad" || vote == "tie (bothbad)" ||
            vote == "tie(bothbad)") {
            vote = "tie";
            both_bad = true;
        }
        j["vote"] = vote;
        try {
            VoteRecord record = j.get<VoteRecord>();
            record.both_bad = record.both_bad || both_bad;
            if (both_bad) {
                ++ingest.both_bad_count;
                record.extra["source_vote_label"] = raw_vote;
            }
            ingest.votes.push_back(std::move(record));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what(),
                             lineno);
        } catch (const ParseError& e) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what(),
                             lineno);
        }
    }
    return ingest;
}

void write_votes(const std::filesystem::path& path, const std::vector<VoteRecord>& votes) {
    write_typed_jsonl(path, votes);
}

std::vector<MatchResult> read_matches(const std::filesystem::path& path) {
    return read_typed_jsonl<MatchResult>(path);
}

void write_matches(const std::filesystem::path& path, const std::vector<MatchResult>& matches) {
    write_typed_jsonl(path, matches);
}

std::vector<SingleGrade> read_grades(const std::filesystem::path& path) {
    return read_typed_jsonl<SingleGrade>(path);
}

void write_grades(const std::filesystem::path& path, const std::vector<SingleGrade>& grades) {
    write_typed_jsonl(path, grades);
}

namespace {

void to_json(nlohmann::json& j, const Annotation& a) {
    j = nlohmann::json{{"question_id", a.question_id},
                       {"model_id", a.model_id},
                       {"is_correct", a.is_correct}};
}

void from_json(const nlohmann::json& j, Annotation& a) {
    a.question_id = j.at("question_id").get<int64_t>();
    a.model_id = j.at("model_id").get<std::string>();
    a.is_correct = j.at("is_correct").get<bool>();
}

} // namespace

std::vector<Annotation> read_annotations(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open annotation file: " + path.string());
    std::vector<Annotation> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            Annotation a;
            from_json(nlohmann::json::parse(line), a);
            out.push_back(std::move(a));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + e.what(),
                             lineno);
        }
    }
    return out;
}

void write_annotations(const std::filesystem::path& path,
                       const std::vector<Annotation>& annotations) {
    std::string content;
    for (const Annotation& a : annotations) {
        nlohmann::json j;
        to_json(j, a);
        content += j.dump();
        content += "\n";
    }
    write_file_if_changed(path, content);
}

} // namespace judgekit
