#include "puminer/heuristics.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "puminer/common.hpp"

namespace puminer {

void HeuristicThresholds::validate() const {
    if (thre1 < 0 || thre1 > 1) throw std::invalid_argument("thre1 out of [0,1]");
    if (thre2 < 0 || thre2 > 1) throw std::invalid_argument("thre2 out of [0,1]");
    if (kw_ratio_a < 0 || kw_ratio_a > 1) throw std::invalid_argument("a out of [0,1]");
    if (kw_count_b < 0) throw std::invalid_argument("b negative");
}

const char* provenance_name(Provenance p) {
    switch (p) {
        case Provenance::None: return "none";
        case Provenance::TagFilter: return "tag_filter";
        case Provenance::ContentFilter: return "content_filter";
        case Provenance::ExternalPositive: return "external_positive";
    }
    return "none";
}

namespace {

std::vector<std::string> split_words(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string w;
    while (in >> w) out.push_back(w);
    return out;
}

// British/American suffix swaps: -ise/-ize families and -isation/-ization.
std::vector<std::string> spelling_forms(const std::string& word) {
    static const std::pair<const char*, const char*> pairs[] = {
        {"isation", "ization"}, {"ization", "isation"},
        {"isations", "izations"}, {"izations", "isations"},
        {"ise", "ize"}, {"ize", "ise"},
        {"ised", "ized"}, {"ized", "ised"},
        {"iser", "izer"}, {"izer", "iser"},
        {"ising", "izing"}, {"izing", "ising"},
    };
    std::vector<std::string> forms{word};
    for (auto [from, to] : pairs) {
        size_t n = std::char_traits<char>::length(from);
        if (word.size() > n && word.compare(word.size() - n, n, from) == 0) {
            forms.push_back(word.substr(0, word.size() - n) + to);
            break;  // pairs are ordered longest-first; one swap applies
        }
    }
    return forms;
}

std::string join_with(const std::vector<std::string>& words, const char* sep) {
    std::string out;
    for (size_t i = 0; i < words.size(); ++i) {
        if (i) out += sep;
        out += words[i];
    }
    return out;
}

}  // namespace

std::set<std::string> expand_variants(const std::string& keyword, const StopwordList& stopwords) {
    std::set<std::string> variants;
    std::vector<std::string> words = split_words(to_lower(trim(keyword)));
    if (words.empty()) return variants;

    // cartesian product of per-word spelling forms (at most a few)
    std::vector<std::vector<std::string>> spelled{{}};
    for (const auto& w : words) {
        std::vector<std::vector<std::string>> next;
        for (const auto& prefix : spelled)
            for (const auto& form : spelling_forms(w)) {
                auto v = prefix;
                v.push_back(form);
                next.push_back(std::move(v));
            }
        spelled = std::move(next);
    }

    for (const auto& w : spelled) {
        if (w.size() == 1) {
            variants.insert(w[0]);
            variants.insert(stem_token(w[0]));
            continue;
        }
        std::vector<std::string> stems;
        stems.reserve(w.size());
        for (const auto& x : w) stems.push_back(stem_token(x));

        variants.insert(join_with(w, " "));
        variants.insert(join_with(w, "-"));
        variants.insert(join_with(w, ""));
        variants.insert(join_with(stems, " "));
        variants.insert(join_with(stems, "-"));
        variants.insert(stem_token(join_with(w, "-")));
        variants.insert(stem_token(join_with(w, "")));

        // what the tokenizer itself produces: stopwords dropped, words
        // stemmed, survivors fused with hyphens and stemmed once more
        std::vector<std::string> surviving;
        for (const auto& x : w)
            if (!stopwords.contains(x)) surviving.push_back(stem_token(x));
        if (!surviving.empty()) variants.insert(stem_token(join_with(surviving, "-")));
    }
    return variants;
}

SecurityLexicon SecurityLexicon::load(const std::string& path, const StopwordList& stopwords) {
    std::string content = read_text_file(path);
    std::vector<std::string> keywords;
    std::istringstream in(content);
    std::string line;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        keywords.push_back(to_lower(line));
    }
    if (keywords.empty()) throw InputError("empty lexicon: " + path);
    SecurityLexicon lex = from_keywords(keywords, stopwords,
                                        std::filesystem::path(path).filename().string());
    lex.hash_ = sha256_hex(content);
    return lex;
}

SecurityLexicon SecurityLexicon::from_keywords(const std::vector<std::string>& keywords,
                                               const StopwordList& stopwords,
                                               std::string name) {
    SecurityLexicon lex;
    lex.name_ = std::move(name);
    std::string joined;
    std::unordered_set<std::string> seen;
    for (const auto& kw : keywords) {
        std::string k = to_lower(trim(kw));
        if (k.empty()) continue;
        lex.keywords_.push_back(k);
        joined += k;
        joined += '\n';
        if (!seen.insert(k).second) {
            lex.collisions_.push_back(k);
            continue;
        }
        Entry e;
        e.keyword = k;
        auto vs = expand_variants(k, stopwords);
        e.variants.assign(vs.begin(), vs.end());
        std::sort(e.variants.begin(), e.variants.end(), [](const auto& a, const auto& b) {
            if (a.size() != b.size()) return a.size() > b.size();
            return a < b;
        });
        lex.entries_.push_back(std::move(e));

        std::vector<std::string> words = split_words(k);
        if (words.size() >= 2) {
            // phrase keys per spelling variant of the whole phrase
            std::vector<std::vector<std::string>> spelled{{}};
            for (const auto& w : words) {
                std::vector<std::vector<std::string>> next;
                for (const auto& prefix : spelled)
                    for (const auto& form : spelling_forms(w)) {
                        auto v = prefix;
                        v.push_back(form);
                        next.push_back(std::move(v));
                    }
                spelled = std::move(next);
            }
            for (const auto& w : spelled) {
                std::vector<std::string> surviving;
                for (const auto& x : w)
                    if (!stopwords.contains(x)) surviving.push_back(stem_token(x));
                lex.joiner_.add(std::move(surviving));
            }
        }
    }
    lex.joiner_.finalize();
    lex.hash_ = sha256_hex(joined);
    return lex;
}

namespace {

struct JoinedStream {
    std::string text;                 // tokens joined with single spaces
    std::vector<size_t> token_starts; // offset of each token in text
};

JoinedStream join_stream(const CleanPost& post) {
    JoinedStream js;
    for (const auto& t : post.tokens) {
        if (!js.text.empty()) js.text += ' ';
        js.token_starts.push_back(js.text.size());
        js.text += t;
    }
    return js;
}

bool at_token_boundary(const std::string& text, size_t pos) {
    return pos == 0 || text[pos - 1] == ' ';
}

}  // namespace

KeywordStats count_keywords(const CleanPost& post, const SecurityLexicon& lexicon) {
    KeywordStats stats;
    if (post.token_count == 0) return stats;
    JoinedStream js = join_stream(post);

    for (const auto& entry : lexicon.entries()) {
        std::unordered_set<size_t> starts_taken;
        int entry_count = 0;
        for (const auto& v : entry.variants) {  // longest variant first
            if (v.size() <= 3) {
                // short variants: whole-token equality only
                for (size_t ti = 0; ti < post.tokens.size(); ++ti) {
                    if (post.tokens[ti] == v && starts_taken.insert(js.token_starts[ti]).second)
                        ++entry_count;
                }
                continue;
            }
            bool need_boundary = v.size() <= 6;  // guards "signed" inside "assigned"
            size_t pos = 0;
            while ((pos = js.text.find(v, pos)) != std::string::npos) {
                if (!need_boundary || at_token_boundary(js.text, pos)) {
                    if (starts_taken.insert(pos).second) ++entry_count;
                    pos += v.size();  // non-overlapping per variant
                } else {
                    ++pos;
                }
            }
        }
        stats.kw_count += entry_count;
    }
    stats.kw_ratio = double(stats.kw_count) / double(post.token_count);
    return stats;
}

bool is_anchor_tag(const std::string& tag) {
    return tag.find("security") != std::string::npos;
}

std::set<std::string> select_security_tags(const std::vector<CleanPost>& corpus,
                                           const HeuristicThresholds& thresholds) {
    thresholds.validate();
    size_t security_posts = 0;
    std::map<std::string, size_t> tag_total;     // posts carrying the tag
    std::map<std::string, size_t> tag_security;  // of those, in the security context
    for (const auto& post : corpus) {
        bool in_context = std::any_of(post.tags.begin(), post.tags.end(), is_anchor_tag);
        if (in_context) ++security_posts;
        std::set<std::string> uniq(post.tags.begin(), post.tags.end());
        for (const auto& t : uniq) {
            ++tag_total[t];
            if (in_context) ++tag_security[t];
        }
    }
    if (security_posts == 0) throw InputError("no anchor-tagged posts in corpus");

    std::set<std::string> selected;
    for (const auto& [tag, total] : tag_total) {
        if (is_anchor_tag(tag)) continue;
        auto it = tag_security.find(tag);
        size_t in_sec = it == tag_security.end() ? 0 : it->second;
        double frequency = double(in_sec) / double(total);
        double popularity = double(in_sec) / double(security_posts);
        if (frequency > thresholds.thre1 && popularity > thresholds.thre2)
            selected.insert(tag);
    }
    return selected;
}

std::vector<LabelRecord> label_corpus(const std::vector<CleanPost>& corpus,
                                      const SecurityLexicon& lexicon,
                                      const HeuristicThresholds& thresholds,
                                      const std::set<int64_t>& external_positive_ids,
                                      LabelSummary* summary) {
    thresholds.validate();
    std::unordered_set<int64_t> seen_ids;
    for (const auto& p : corpus)
        if (!seen_ids.insert(p.id).second)
            throw InputError("duplicate post id: " + std::to_string(p.id));

    std::set<std::string> selected;
    bool has_anchor = std::any_of(corpus.begin(), corpus.end(), [](const CleanPost& p) {
        return std::any_of(p.tags.begin(), p.tags.end(), is_anchor_tag);
    });
    if (has_anchor) selected = select_security_tags(corpus, thresholds);

    LabelSummary local;
    local.selected_tags = selected;
    std::vector<LabelRecord> records;
    records.reserve(corpus.size());
    for (const auto& post : corpus) {
        LabelRecord rec;
        rec.post_id = post.id;
        rec.stats = count_keywords(post, lexicon);

        bool tag_hit = std::any_of(post.tags.begin(), post.tags.end(), [&](const std::string& t) {
            return is_anchor_tag(t) || selected.count(t) > 0;
        });
        bool content_hit = rec.stats.kw_ratio >= thresholds.kw_ratio_a &&
                           rec.stats.kw_count >= thresholds.kw_count_b;
        bool external_hit = external_positive_ids.count(post.id) > 0;

        if (tag_hit) {
            rec.label = {true, Provenance::TagFilter};
            ++local.tag_filter;
        } else if (content_hit) {
            rec.label = {true, Provenance::ContentFilter};
            ++local.content_filter;
        } else if (external_hit) {
            rec.label = {true, Provenance::ExternalPositive};
            ++local.external_positive;
        } else {
            rec.label = {false, Provenance::None};
        }
        if (rec.label.positive) ++local.positive;
        else ++local.unlabelled;
        records.push_back(std::move(rec));
    }
    if (summary) *summary = std::move(local);
    return records;
}

std::string labels_to_csv(const std::vector<LabelRecord>& records) {
    std::string out = "post_id,label,provenance,kw_count,kw_ratio\n";
    for (const auto& r : records) {
        out += std::to_string(r.post_id);
        out += ',';
        out += r.label.positive ? "positive" : "unlabelled";
        out += ',';
        out += provenance_name(r.label.provenance);
        out += ',';
        out += std::to_string(r.stats.kw_count);
        out += ',';
        out += format_double(r.stats.kw_ratio);
        out += '\n';
    }
    return out;
}

std::vector<LabelRecord> labels_from_csv(const std::string& csv) {
    std::vector<LabelRecord> records;
    std::istringstream in(csv);
    std::string line;
    bool first = true;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (first) {
            first = false;
            continue;  // header
        }
        if (trim(line).empty()) continue;
        std::vector<std::string> fields;
        std::istringstream ls(line);
        std::string f;
        while (std::getline(ls, f, ',')) fields.push_back(f);
        if (fields.size() != 5)
            throw InputError("labels csv line " + std::to_string(line_no) + ": expected 5 fields");
        LabelRecord r;
        r.post_id = std::stoll(fields[0]);
        r.label.positive = fields[1] == "positive";
        if (fields[2] == "tag_filter") r.label.provenance = Provenance::TagFilter;
        else if (fields[2] == "content_filter") r.label.provenance = Provenance::ContentFilter;
        else if (fields[2] == "external_positive") r.label.provenance = Provenance::ExternalPositive;
        else r.label.provenance = Provenance::None;
        r.stats.kw_count = std::stoi(fields[3]);
        r.stats.kw_ratio = std::stod(fields[4]);
        records.push_back(r);
    }
    return records;
}

}  // namespace puminer
