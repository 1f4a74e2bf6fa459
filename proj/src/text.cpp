#include "puminer/text.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "puminer/common.hpp"
#include "puminer/porter.hpp"

namespace puminer {

const char* source_name(Source s) {
    switch (s) {
        case Source::StackOverflow: return "StackOverflow";
        case Source::SecurityStackExchange: return "SecurityStackExchange";
        case Source::Other: return "Other";
    }
    return "Other";
}

Source source_from_name(const std::string& name) {
    if (name == "StackOverflow") return Source::StackOverflow;
    if (name == "SecurityStackExchange") return Source::SecurityStackExchange;
    if (name == "Other") return Source::Other;
    throw InputError("unknown source name: " + name);
}

StopwordList StopwordList::load(const std::string& path) {
    StopwordList sw;
    std::string content = read_text_file(path);
    sw.hash_ = sha256_hex(content);
    sw.name_ = std::filesystem::path(path).filename().string();
    std::istringstream in(content);
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        sw.words_.insert(to_lower(line));
    }
    if (sw.words_.empty()) throw InputError("empty stopword list: " + path);
    return sw;
}

StopwordList StopwordList::from_words(std::vector<std::string> words, std::string name) {
    StopwordList sw;
    std::string joined;
    std::sort(words.begin(), words.end());
    for (auto& w : words) {
        joined += w;
        joined += '\n';
        sw.words_.insert(to_lower(w));
    }
    sw.hash_ = sha256_hex(joined);
    sw.name_ = std::move(name);
    return sw;
}

void PhraseJoiner::add(std::vector<std::string> stemmed_words) {
    if (stemmed_words.size() >= 2) phrases.push_back(std::move(stemmed_words));
}

void PhraseJoiner::finalize() {
    std::sort(phrases.begin(), phrases.end(),
              [](const auto& a, const auto& b) {
                  if (a.size() != b.size()) return a.size() > b.size();
                  return a < b;
              });
    phrases.erase(std::unique(phrases.begin(), phrases.end()), phrases.end());
}

namespace {

bool iequal_at(const std::string& s, size_t pos, const char* lower_lit) {
    for (size_t i = 0; lower_lit[i]; ++i) {
        if (pos + i >= s.size()) return false;
        if (std::tolower(static_cast<unsigned char>(s[pos + i])) != lower_lit[i]) return false;
    }
    return true;
}

// Start of the tag named `name` at pos: "<name>" or "<name ...".
bool tag_opens_at(const std::string& s, size_t pos, const char* name) {
    if (s[pos] != '<') return false;
    size_t n = std::char_traits<char>::length(name);
    if (!iequal_at(s, pos + 1, name)) return false;
    size_t after = pos + 1 + n;
    if (after >= s.size()) return true;  // truncated input
    char c = s[after];
    return c == '>' || std::isspace(static_cast<unsigned char>(c)) || c == '/';
}

// Index just past "</name>" starting the search at `from`, or npos.
size_t find_close(const std::string& s, size_t from, const char* name) {
    size_t n = std::char_traits<char>::length(name);
    for (size_t i = from; i + n + 2 < s.size() + 1; ++i) {
        if (s[i] == '<' && i + 1 < s.size() && s[i + 1] == '/' && iequal_at(s, i + 2, name)) {
            size_t gt = s.find('>', i + 2 + n);
            if (gt == std::string::npos) return s.size();
            return gt + 1;
        }
    }
    return std::string::npos;
}

void append_utf8(std::string& out, uint32_t cp) {
    if (cp < 0x80) {
        out += char(cp);
    } else if (cp < 0x800) {
        out += char(0xC0 | (cp >> 6));
        out += char(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += char(0xE0 | (cp >> 12));
        out += char(0x80 | ((cp >> 6) & 0x3F));
        out += char(0x80 | (cp & 0x3F));
    } else {
        out += char(0xF0 | (cp >> 18));
        out += char(0x80 | ((cp >> 12) & 0x3F));
        out += char(0x80 | ((cp >> 6) & 0x3F));
        out += char(0x80 | (cp & 0x3F));
    }
}

}  // namespace

std::string decode_html_entities(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    size_t i = 0;
    while (i < s.size()) {
        if (s[i] != '&') {
            out += s[i++];
            continue;
        }
        size_t semi = s.find(';', i + 1);
        if (semi == std::string::npos || semi - i > 10) {
            out += s[i++];
            continue;
        }
        std::string ent = s.substr(i + 1, semi - i - 1);
        if (ent == "lt") out += '<';
        else if (ent == "gt") out += '>';
        else if (ent == "amp") out += '&';
        else if (ent == "quot") out += '"';
        else if (ent == "apos") out += '\'';
        else if (ent == "nbsp") out += ' ';
        else if (!ent.empty() && ent[0] == '#') {
            uint32_t cp = 0;
            bool ok = ent.size() > 1;
            if (ent.size() > 2 && (ent[1] == 'x' || ent[1] == 'X')) {
                for (size_t j = 2; j < ent.size(); ++j) {
                    char c = ent[j];
                    if (std::isxdigit(static_cast<unsigned char>(c)))
                        cp = cp * 16 + uint32_t(std::isdigit(static_cast<unsigned char>(c))
                                                    ? c - '0'
                                                    : std::tolower(c) - 'a' + 10);
                    else { ok = false; break; }
                }
            } else {
                for (size_t j = 1; j < ent.size(); ++j) {
                    if (std::isdigit(static_cast<unsigned char>(ent[j])))
                        cp = cp * 10 + uint32_t(ent[j] - '0');
                    else { ok = false; break; }
                }
            }
            if (ok && cp > 0 && cp <= 0x10FFFF) append_utf8(out, cp);
            else { out += s[i]; ++i; continue; }
        } else {
            out += s[i++];
            continue;
        }
        i = semi + 1;
    }
    return out;
}

std::string strip_code_and_html(const std::string& html) {
    std::string no_blocks;
    no_blocks.reserve(html.size());
    size_t i = 0;
    while (i < html.size()) {
        if (html[i] == '<' && tag_opens_at(html, i, "pre")) {
            size_t end = find_close(html, i, "pre");
            no_blocks += ' ';
            i = (end == std::string::npos) ? html.size() : end;
        } else if (html[i] == '<' && tag_opens_at(html, i, "code")) {
            size_t end = find_close(html, i, "code");
            no_blocks += ' ';
            i = (end == std::string::npos) ? html.size() : end;
        } else {
            no_blocks += html[i++];
        }
    }

    std::string no_tags;
    no_tags.reserve(no_blocks.size());
    i = 0;
    while (i < no_blocks.size()) {
        char c = no_blocks[i];
        if (c == '<' && i + 1 < no_blocks.size()) {
            char n = no_blocks[i + 1];
            if (std::isalpha(static_cast<unsigned char>(n)) || n == '/' || n == '!' || n == '?') {
                size_t gt = no_blocks.find('>', i + 1);
                no_tags += ' ';
                i = (gt == std::string::npos) ? no_blocks.size() : gt + 1;
                continue;
            }
        }
        no_tags += c;
        ++i;
    }

    std::string decoded = decode_html_entities(no_tags);

    std::string out;
    out.reserve(decoded.size());
    bool in_space = true;
    for (char c : decoded) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            if (!in_space) out += ' ';
            in_space = true;
        } else {
            out += c;
            in_space = false;
        }
    }
    if (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

std::string stem_token(const std::string& token) {
    if (token.size() <= 3) return token;
    return porter_stem_fixpoint(token);
}

namespace {

bool is_token_alnum(char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
}

std::vector<std::string> split_tokens(const std::string& text) {
    std::string lower = to_lower(text);
    std::vector<std::string> tokens;
    std::string cur;
    for (size_t i = 0; i < lower.size(); ++i) {
        char c = lower[i];
        bool keep = false;
        if (is_token_alnum(c)) {
            keep = true;
        } else if ((c == '-' || c == '.' || c == '_') && !cur.empty() &&
                   is_token_alnum(cur.back()) && i + 1 < lower.size() &&
                   is_token_alnum(lower[i + 1])) {
            // joiners survive only inside alphanumeric runs
            keep = true;
        }
        if (keep) {
            cur += c;
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

std::vector<std::string> join_phrases(std::vector<std::string> tokens, const PhraseJoiner& joiner) {
    if (joiner.phrases.empty()) return tokens;
    std::vector<std::string> out;
    out.reserve(tokens.size());
    size_t i = 0;
    while (i < tokens.size()) {
        const std::vector<std::string>* hit = nullptr;
        for (const auto& phrase : joiner.phrases) {  // longest first
            if (i + phrase.size() > tokens.size()) continue;
            bool all = true;
            for (size_t j = 0; j < phrase.size(); ++j)
                if (tokens[i + j] != phrase[j]) { all = false; break; }
            if (all) { hit = &phrase; break; }
        }
        if (hit) {
            std::string glued;
            for (size_t j = 0; j < hit->size(); ++j) {
                if (j) glued += '-';
                glued += tokens[i + j];
            }
            out.push_back(stem_token(glued));
            i += hit->size();
        } else {
            out.push_back(std::move(tokens[i]));
            ++i;
        }
    }
    return out;
}

}  // namespace

std::vector<std::string> tokenize_normalize(const std::string& text,
                                            const StopwordList& stopwords,
                                            const PhraseJoiner* joiner) {
    std::vector<std::string> tokens = split_tokens(text);
    std::vector<std::string> kept;
    kept.reserve(tokens.size());
    for (auto& t : tokens) {
        if (stopwords.contains(t)) continue;
        std::string stem = stem_token(t);
        // a stem that lands on a stopword would be dropped on re-tokenization
        if (stopwords.contains(stem)) continue;
        kept.push_back(std::move(stem));
    }
    if (joiner) kept = join_phrases(std::move(kept), *joiner);
    return kept;
}

CleanPost preprocess_post(const RawPost& post, const StopwordList& stopwords,
                          const PhraseJoiner* joiner) {
    std::string text = strip_code_and_html(post.title);
    text += ' ';
    text += strip_code_and_html(post.question_html);
    for (const auto& a : post.answers_html) {
        text += ' ';
        text += strip_code_and_html(a);
    }
    CleanPost clean;
    clean.id = post.id;
    clean.source = post.source;
    clean.tokens = tokenize_normalize(text, stopwords, joiner);
    clean.token_count = clean.tokens.size();
    clean.tags.reserve(post.tags.size());
    for (const auto& t : post.tags) clean.tags.push_back(to_lower(trim(t)));
    return clean;
}

}  // namespace puminer
