#include "puminer/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "puminer/common.hpp"
#include "puminer/text.hpp"

namespace puminer {

namespace {

using json = nlohmann::json;

struct XmlCursor {
    const std::string& text;
    size_t pos = 0;
    size_t line = 1;

    explicit XmlCursor(const std::string& t) : text(t) {}

    bool eof() const { return pos >= text.size(); }
    char peek() const { return text[pos]; }

    void advance(size_t n = 1) {
        for (size_t i = 0; i < n && pos < text.size(); ++i) {
            if (text[pos] == '\n') ++line;
            ++pos;
        }
    }

    void skip_ws() {
        while (!eof() && std::isspace(static_cast<unsigned char>(peek()))) advance();
    }

    [[noreturn]] void fail(const std::string& msg) const { fail_at(line, msg); }

    [[noreturn]] void fail_at(size_t at, const std::string& msg) const {
        throw InputError("xml parse error at line " + std::to_string(at) + ": " + msg);
    }
};

std::string read_name(XmlCursor& c) {
    std::string name;
    while (!c.eof()) {
        char ch = c.peek();
        if (std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' ||
            ch == ':' || ch == '.')
            name += ch, c.advance();
        else
            break;
    }
    if (name.empty()) c.fail("expected name");
    return name;
}

// Parses attributes up to '>' or '/>'; returns true for self-closing.
bool read_attributes(XmlCursor& c, std::unordered_map<std::string, std::string>& attrs) {
    while (true) {
        c.skip_ws();
        if (c.eof()) c.fail("unterminated element");
        if (c.peek() == '/') {
            c.advance();
            if (c.eof() || c.peek() != '>') c.fail("expected '>' after '/'");
            c.advance();
            return true;
        }
        if (c.peek() == '>') {
            c.advance();
            return false;
        }
        size_t attr_line = c.line;
        std::string name = read_name(c);
        c.skip_ws();
        if (c.eof() || c.peek() != '=') c.fail_at(attr_line, "expected '=' after attribute " + name);
        c.advance();
        c.skip_ws();
        if (c.eof() || (c.peek() != '"' && c.peek() != '\''))
            c.fail_at(attr_line, "expected quoted value for attribute " + name);
        char quote = c.peek();
        c.advance();
        std::string value;
        while (!c.eof() && c.peek() != quote) {
            value += c.peek();
            c.advance();
        }
        if (c.eof()) c.fail("unterminated attribute value");
        c.advance();  // closing quote
        attrs[name] = decode_html_entities(value);
    }
}

std::vector<std::string> decode_tags(const std::string& decoded) {
    // "<php><security>" after entity decoding; a bare word is one tag
    std::vector<std::string> tags;
    size_t i = 0;
    while (i < decoded.size()) {
        if (decoded[i] == '<') {
            size_t close = decoded.find('>', i + 1);
            if (close == std::string::npos) break;
            std::string tag = to_lower(trim(decoded.substr(i + 1, close - i - 1)));
            if (!tag.empty()) tags.push_back(tag);
            i = close + 1;
        } else if (decoded[i] == '|') {
            ++i;
        } else {
            size_t next = decoded.find_first_of("<|", i);
            std::string tag = to_lower(trim(decoded.substr(i, next - i)));
            if (!tag.empty()) tags.push_back(tag);
            if (next == std::string::npos) break;
            i = next;
        }
    }
    return tags;
}

}  // namespace

IngestResult parse_stackexchange_xml(const std::string& path, Source source) {
    std::string content = read_text_file(path);
    IngestResult result;
    XmlCursor c(content);

    struct PendingAnswer {
        int64_t parent;
        std::string body;
    };
    std::vector<PendingAnswer> answers;
    std::unordered_map<int64_t, size_t> question_index;
    size_t total_answer_rows = 0;

    while (true) {
        c.skip_ws();
        if (c.eof()) break;
        if (c.peek() != '<') c.fail("expected '<'");
        c.advance();
        if (c.eof()) c.fail("dangling '<'");
        char ch = c.peek();
        if (ch == '?') {  // declaration
            size_t end = content.find("?>", c.pos);
            if (end == std::string::npos) c.fail("unterminated declaration");
            c.advance(end + 2 - c.pos);
            continue;
        }
        if (ch == '!') {  // comment or doctype
            size_t end = content.find('>', c.pos);
            if (end == std::string::npos) c.fail("unterminated comment");
            if (content.compare(c.pos, 3, "!--") == 0) {
                end = content.find("-->", c.pos);
                if (end == std::string::npos) c.fail("unterminated comment");
                end += 2;
            }
            c.advance(end + 1 - c.pos);
            continue;
        }
        if (ch == '/') {  // closing tag
            c.advance();
            read_name(c);
            c.skip_ws();
            if (c.eof() || c.peek() != '>') c.fail("malformed closing tag");
            c.advance();
            continue;
        }
        size_t elem_line = c.line;
        std::string name = read_name(c);
        std::unordered_map<std::string, std::string> attrs;
        bool self_closing = read_attributes(c, attrs);
        if (name != "row") {
            if (!self_closing) continue;  // container like <posts>
            continue;
        }
        (void)self_closing;

        auto require = [&](const char* key) -> const std::string& {
            auto it = attrs.find(key);
            if (it == attrs.end())
                throw InputError("xml parse error at line " + std::to_string(elem_line) +
                                 ": row missing attribute " + key);
            return it->second;
        };
        int64_t id = std::stoll(require("Id"));
        int type = std::stoi(require("PostTypeId"));
        const std::string& body = require("Body");

        if (type == 1) {
            std::vector<std::string> tags;
            if (auto it = attrs.find("Tags"); it != attrs.end()) tags = decode_tags(it->second);
            if (tags.empty()) {
                ++result.skipped_questions;
                result.issues.push_back({elem_line, "question " + std::to_string(id) +
                                                        " has no tags; skipped"});
                continue;
            }
            RawPost post;
            post.id = id;
            post.source = source;
            if (auto it = attrs.find("Title"); it != attrs.end()) post.title = it->second;
            post.question_html = body;
            post.tags = std::move(tags);
            if (auto it = attrs.find("Score"); it != attrs.end()) post.score = std::stoi(it->second);
            if (auto it = attrs.find("CreationDate"); it != attrs.end()) post.created = it->second;
            question_index[post.id] = result.posts.size();
            result.posts.push_back(std::move(post));
        } else if (type == 2) {
            ++total_answer_rows;
            answers.push_back({std::stoll(require("ParentId")), body});
        }
        // any other PostTypeId is ignored
    }

    for (auto& a : answers) {
        auto it = question_index.find(a.parent);
        if (it == question_index.end()) {
            ++result.orphan_answers;
        } else {
            result.posts[it->second].answers_html.push_back(std::move(a.body));
            ++result.linked_answers;
        }
    }
    (void)total_answer_rows;
    return result;
}

std::string export_jsonl(const std::vector<RawPost>& posts) {
    std::string out;
    for (const auto& p : posts) {
        json j;
        j["id"] = p.id;
        j["source"] = source_name(p.source);
        j["title"] = p.title;
        j["question_html"] = p.question_html;
        j["answers_html"] = p.answers_html;
        j["tags"] = p.tags;
        j["score"] = p.score;
        j["created"] = p.created;
        out += j.dump();
        out += '\n';
    }
    return out;
}

IngestResult parse_jsonl_text(const std::string& text, Source default_source) {
    IngestResult result;
    std::istringstream in(text);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            result.issues.push_back({line_no, "invalid json"});
            continue;
        }
        try {
            RawPost p;
            if (!j.contains("id")) throw InputError("missing field id");
            p.id = j.at("id").get<int64_t>();
            if (!j.contains("title")) throw InputError("missing field title");
            p.title = j.at("title").get<std::string>();
            if (!j.contains("question_html")) throw InputError("missing field question_html");
            p.question_html = j.at("question_html").get<std::string>();
            if (!j.contains("answers_html")) throw InputError("missing field answers_html");
            p.answers_html = j.at("answers_html").get<std::vector<std::string>>();
            if (!j.contains("tags")) throw InputError("missing field tags");
            p.tags = j.at("tags").get<std::vector<std::string>>();
            if (j.contains("source")) p.source = source_from_name(j.at("source").get<std::string>());
            else p.source = default_source;
            if (j.contains("score")) p.score = j.at("score").get<int>();
            if (j.contains("created")) p.created = j.at("created").get<std::string>();
            for (auto& t : p.tags) t = to_lower(trim(t));
            result.posts.push_back(std::move(p));
        } catch (const std::exception& e) {
            result.issues.push_back({line_no, e.what()});
        }
    }
    return result;
}

IngestResult parse_jsonl(const std::string& path) {
    return parse_jsonl_text(read_text_file(path));
}

namespace {

size_t word_count(const std::string& text) {
    size_t count = 0;
    bool in_word = false;
    for (char c : text) {
        bool space = std::isspace(static_cast<unsigned char>(c));
        if (!space && !in_word) ++count;
        in_word = !space;
    }
    return count;
}

FieldStats summarize(std::vector<double> values) {
    FieldStats fs;
    if (values.empty()) return fs;
    std::sort(values.begin(), values.end());
    double sum = 0;
    for (double v : values) sum += v;
    fs.average = sum / double(values.size());
    size_t n = values.size();
    fs.median = n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
    fs.min = values.front();
    fs.max = values.back();
    return fs;
}

SourceStats stats_for(const std::vector<const RawPost*>& posts) {
    SourceStats ss;
    ss.post_count = posts.size();
    std::vector<double> tags, title, question, answers;
    tags.reserve(posts.size());
    title.reserve(posts.size());
    question.reserve(posts.size());
    answers.reserve(posts.size());
    for (const RawPost* p : posts) {
        tags.push_back(double(p->tags.size()));
        title.push_back(double(word_count(p->title)));
        question.push_back(double(word_count(p->question_html)));
        size_t aw = 0;
        for (const auto& a : p->answers_html) aw += word_count(a);
        answers.push_back(double(aw));
    }
    ss.tags = summarize(std::move(tags));
    ss.title = summarize(std::move(title));
    ss.question = summarize(std::move(question));
    ss.answers = summarize(std::move(answers));
    return ss;
}

}  // namespace

CorpusStats corpus_stats(const std::vector<RawPost>& posts) {
    if (posts.empty()) throw InputError("corpus_stats: empty corpus");
    CorpusStats cs;
    std::map<std::string, std::vector<const RawPost*>> by_source;
    std::vector<const RawPost*> all;
    all.reserve(posts.size());
    for (const auto& p : posts) {
        by_source[source_name(p.source)].push_back(&p);
        all.push_back(&p);
    }
    for (auto& [name, group] : by_source) cs.per_source[name] = stats_for(group);
    cs.all = stats_for(all);
    return cs;
}

}  // namespace puminer
