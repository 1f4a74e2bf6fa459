#pragma once

// Tag-based and content-based filtering that splits a corpus into
// labelled-positive and unlabelled posts.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "puminer/post.hpp"
#include "puminer/text.hpp"

namespace puminer {

struct HeuristicThresholds {
    double thre1 = 0.1;    // tag frequency in the security context, strict >
    double thre2 = 0.01;   // tag popularity in the security context, strict >
    double kw_ratio_a = 0.053;  // content filter, inclusive >=
    int kw_count_b = 8;         // content filter, inclusive >=

    void validate() const;
};

struct KeywordStats {
    int kw_count = 0;
    double kw_ratio = 0.0;
};

enum class Provenance { None, TagFilter, ContentFilter, ExternalPositive };

const char* provenance_name(Provenance p);

struct PULabel {
    bool positive = false;
    Provenance provenance = Provenance::None;
};

// Every lowercase form a keyword may take in normalized text: spelling
// swaps (ise/ize, isation/ization), space/hyphen/joined word forms, and
// their stems. Variants of length <= 3 only ever match whole tokens.
std::set<std::string> expand_variants(const std::string& keyword, const StopwordList& stopwords);

class SecurityLexicon {
public:
    struct Entry {
        std::string keyword;
        std::vector<std::string> variants;  // longest first
    };

    static SecurityLexicon load(const std::string& path, const StopwordList& stopwords);
    static SecurityLexicon from_keywords(const std::vector<std::string>& keywords,
                                         const StopwordList& stopwords,
                                         std::string name = "inline");

    // Keyword lines as loaded, duplicates included.
    const std::vector<std::string>& keywords() const { return keywords_; }
    // Unique entries used for matching.
    const std::vector<Entry>& entries() const { return entries_; }
    const std::vector<std::string>& collisions() const { return collisions_; }
    const PhraseJoiner& phrase_joiner() const { return joiner_; }
    const std::string& name() const { return name_; }
    const std::string& sha256() const { return hash_; }

private:
    std::vector<std::string> keywords_;
    std::vector<Entry> entries_;
    std::vector<std::string> collisions_;
    PhraseJoiner joiner_;
    std::string name_;
    std::string hash_;
};

KeywordStats count_keywords(const CleanPost& post, const SecurityLexicon& lexicon);

// Non-anchor tags co-occurring with the security context above both
// thresholds. Errors if no post carries an anchor tag.
std::set<std::string> select_security_tags(const std::vector<CleanPost>& corpus,
                                           const HeuristicThresholds& thresholds);

bool is_anchor_tag(const std::string& tag);

struct LabelRecord {
    int64_t post_id = 0;
    PULabel label;
    KeywordStats stats;
};

struct LabelSummary {
    size_t positive = 0;
    size_t unlabelled = 0;
    size_t tag_filter = 0;
    size_t content_filter = 0;
    size_t external_positive = 0;
    std::set<std::string> selected_tags;
};

std::vector<LabelRecord> label_corpus(const std::vector<CleanPost>& corpus,
                                      const SecurityLexicon& lexicon,
                                      const HeuristicThresholds& thresholds,
                                      const std::set<int64_t>& external_positive_ids,
                                      LabelSummary* summary = nullptr);

std::string labels_to_csv(const std::vector<LabelRecord>& records);
std::vector<LabelRecord> labels_from_csv(const std::string& csv);

}  // namespace puminer
