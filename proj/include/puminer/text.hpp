#pragma once

// Post normalization: code/HTML stripping, token splitting, stopword
// removal, stemming, and compound-phrase joining.

#include <string>
#include <unordered_set>
#include <vector>

#include "puminer/post.hpp"

namespace puminer {

class StopwordList {
public:
    StopwordList() = default;
    static StopwordList load(const std::string& path);
    static StopwordList from_words(std::vector<std::string> words, std::string name = "inline");

    bool contains(const std::string& word) const { return words_.count(word) > 0; }
    size_t size() const { return words_.size(); }
    const std::string& name() const { return name_; }
    const std::string& sha256() const { return hash_; }

private:
    std::unordered_set<std::string> words_;
    std::string name_;
    std::string hash_;
};

// Multi-word lexicon phrases, keyed by their stemmed surviving words.
// Adjacent tokens matching a phrase are fused into one hyphenated token.
struct PhraseJoiner {
    // Each phrase is a sequence of >= 2 stemmed words. Matched greedily
    // left-to-right, longest phrase first.
    std::vector<std::vector<std::string>> phrases;

    void add(std::vector<std::string> stemmed_words);
    void finalize();  // sort longest-first, dedupe
};

// Removes <pre>/<code> blocks entirely, deletes remaining tags keeping
// their inner text, decodes HTML entities, collapses whitespace.
std::string strip_code_and_html(const std::string& html);

std::string decode_html_entities(const std::string& s);

// Stem used for token normalization: tokens shorter than four characters
// pass through unchanged (acronyms such as aes/ssh must stay matchable),
// longer tokens take the Porter fixed point so normalization is idempotent.
std::string stem_token(const std::string& token);

std::vector<std::string> tokenize_normalize(const std::string& text,
                                            const StopwordList& stopwords,
                                            const PhraseJoiner* joiner = nullptr);

CleanPost preprocess_post(const RawPost& post, const StopwordList& stopwords,
                          const PhraseJoiner* joiner = nullptr);

}  // namespace puminer
