#pragma once

// Parsers for Stack Exchange dump XML and the JSONL interchange format,
// plus Table-1-style corpus statistics.

#include <map>
#include <string>
#include <vector>

#include "puminer/post.hpp"

namespace puminer {

struct IngestIssue {
    size_t line = 0;
    std::string message;
};

struct IngestResult {
    std::vector<RawPost> posts;
    size_t orphan_answers = 0;     // answers whose ParentId never appeared
    size_t skipped_questions = 0;  // questions with zero tags
    size_t linked_answers = 0;
    std::vector<IngestIssue> issues;
};

// <row .../> elements under a <posts> root. PostTypeId 1 rows become
// questions, PostTypeId 2 rows attach to their ParentId, anything else is
// ignored. Malformed XML throws InputError naming the line.
IngestResult parse_stackexchange_xml(const std::string& path, Source source);

// One JSON object per line with id, source, title, question_html,
// answers_html, tags. Bad lines are reported and skipped.
IngestResult parse_jsonl(const std::string& path);

std::string export_jsonl(const std::vector<RawPost>& posts);
IngestResult parse_jsonl_text(const std::string& text, Source default_source = Source::Other);

struct FieldStats {
    double average = 0;
    double median = 0;
    double min = 0;
    double max = 0;
};

struct SourceStats {
    size_t post_count = 0;
    FieldStats tags;      // tag count per post
    FieldStats title;     // whitespace word count
    FieldStats question;  // whitespace word count
    FieldStats answers;   // total words across a post's answers
};

struct CorpusStats {
    std::map<std::string, SourceStats> per_source;
    SourceStats all;
};

CorpusStats corpus_stats(const std::vector<RawPost>& posts);

}  // namespace puminer
