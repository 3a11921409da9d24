#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "judgekit/types.hpp"

namespace judgekit {

// JSONL readers/writers. Writers emit one compact JSON object per line with
// keys in a fixed (alphabetical) order, so identical data means identical
// bytes. Readers keep unrecognized fields in each record's `extra` and report
// parse failures with 1-based line numbers.

std::vector<Question> read_questions(const std::filesystem::path& path);
void write_questions(const std::filesystem::path& path, const std::vector<Question>& questions);

std::vector<ModelAnswer> read_answers(const std::filesystem::path& path);
void write_answers(const std::filesystem::path& path, const std::vector<ModelAnswer>& answers);

struct VoteIngest {
    std::vector<VoteRecord> votes;
    long long both_bad_count = 0; // "both bad" labels collapsed to Tie
};

// Accepts label aliases seen in released human-vote data: vote values
// "both_bad"/"bothbad"/"tie (bothbad)" collapse to Tie (counted and tagged),
// "model_a"/"model_b"/"A"/"B"/"tie"; field aliases model_1/model_2 for
// model_a/model_b and model for model_id are normalized on ingestion.
VoteIngest read_votes(const std::filesystem::path& path);
void write_votes(const std::filesystem::path& path, const std::vector<VoteRecord>& votes);

std::vector<MatchResult> read_matches(const std::filesystem::path& path);
void write_matches(const std::filesystem::path& path, const std::vector<MatchResult>& matches);

std::vector<SingleGrade> read_grades(const std::filesystem::path& path);
void write_grades(const std::filesystem::path& path, const std::vector<SingleGrade>& grades);

// Math-harness ground truth: which candidate answers are incorrect.
struct Annotation {
    int64_t question_id = 0;
    std::string model_id;
    bool is_correct = true;
    bool operator==(const Annotation&) const = default;
};

std::vector<Annotation> read_annotations(const std::filesystem::path& path);
void write_annotations(const std::filesystem::path& path, const std::vector<Annotation>& annotations);

// Generic JSONL helpers used by everything above.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
// Writes to a temp file first and renames only when content changed, so
// rerunning a pipeline leaves untouched outputs byte-identical (same mtime).
void write_file_if_changed(const std::filesystem::path& path, const std::string& content);
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& lines);

} // namespace judgekit
