#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace puminer {

enum class Source { StackOverflow, SecurityStackExchange, Other };

const char* source_name(Source s);
Source source_from_name(const std::string& name);

// A question thread straight off the dump: raw HTML bodies, verbatim tags.
struct RawPost {
    int64_t id = 0;
    Source source = Source::Other;
    std::string title;
    std::string question_html;
    std::vector<std::string> answers_html;
    std::vector<std::string> tags;
    int score = 0;
    std::string created;  // ISO-8601 UTC as found in the dump
};

// The same thread after normalization: one stemmed token stream over
// title + question + answers, tags lowercased but never stemmed.
struct CleanPost {
    int64_t id = 0;
    Source source = Source::Other;
    std::vector<std::string> tokens;
    std::vector<std::string> tags;
    size_t token_count = 0;
};

}  // namespace puminer
