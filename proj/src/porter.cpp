#include "puminer/porter.hpp"

#include <array>
#include <string_view>

namespace puminer {

namespace {

bool is_ascii_vowel_letter(char c) {
    return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
}

// A letter is a consonant if it is not a,e,i,o,u and not a y preceded by a
// consonant. Non-letters count as consonants.
bool is_consonant(const std::string& w, size_t i) {
    char c = w[i];
    if (is_ascii_vowel_letter(c)) return false;
    if (c == 'y') return i == 0 ? true : !is_consonant(w, i - 1);
    return true;
}

// m of w[0..len): the number of VC sequences in [C](VC)^m[V].
int measure(const std::string& w, size_t len) {
    int m = 0;
    size_t i = 0;
    while (i < len && is_consonant(w, i)) ++i;
    while (i < len) {
        while (i < len && !is_consonant(w, i)) ++i;
        if (i >= len) break;
        ++m;
        while (i < len && is_consonant(w, i)) ++i;
    }
    return m;
}

bool contains_vowel(const std::string& w, size_t len) {
    for (size_t i = 0; i < len; ++i)
        if (!is_consonant(w, i)) return true;
    return false;
}

bool ends_double_consonant(const std::string& w, size_t len) {
    if (len < 2) return false;
    return w[len - 1] == w[len - 2] && is_consonant(w, len - 1);
}

// *o: the stem ends cvc where the final c is not w, x or y.
bool ends_cvc(const std::string& w, size_t len) {
    if (len < 3) return false;
    if (!is_consonant(w, len - 3)) return false;
    if (is_consonant(w, len - 2)) return false;
    if (!is_consonant(w, len - 1)) return false;
    char last = w[len - 1];
    return last != 'w' && last != 'x' && last != 'y';
}

bool ends_with(const std::string& w, std::string_view suffix) {
    return w.size() >= suffix.size() &&
           std::string_view(w).substr(w.size() - suffix.size()) == suffix;
}

struct Rule {
    std::string_view s1;
    std::string_view s2;
    int min_m;  // condition m > min_m on the stem before s1
};

// Longest matching suffix is found first; if its condition fails, the step
// does nothing (no fallback to a shorter suffix).
bool apply_rules(std::string& w, const Rule* rules, size_t n) {
    size_t best = n;
    for (size_t i = 0; i < n; ++i) {
        if (ends_with(w, rules[i].s1) &&
            (best == n || rules[i].s1.size() > rules[best].s1.size()))
            best = i;
    }
    if (best == n) return false;
    const Rule& r = rules[best];
    size_t stem_len = w.size() - r.s1.size();
    if (measure(w, stem_len) > r.min_m) {
        w.resize(stem_len);
        w.append(r.s2);
        return true;
    }
    return false;
}

void step_1a(std::string& w) {
    if (ends_with(w, "sses")) {
        w.resize(w.size() - 2);
    } else if (ends_with(w, "ies")) {
        w.resize(w.size() - 2);
    } else if (ends_with(w, "ss")) {
        // unchanged
    } else if (ends_with(w, "s")) {
        w.resize(w.size() - 1);
    }
}

void step_1b(std::string& w) {
    if (ends_with(w, "eed")) {
        if (measure(w, w.size() - 3) > 0) w.resize(w.size() - 1);
        return;
    }
    bool removed = false;
    if (ends_with(w, "ed") && contains_vowel(w, w.size() - 2)) {
        w.resize(w.size() - 2);
        removed = true;
    } else if (ends_with(w, "ing") && contains_vowel(w, w.size() - 3)) {
        w.resize(w.size() - 3);
        removed = true;
    }
    if (!removed) return;
    if (ends_with(w, "at") || ends_with(w, "bl") || ends_with(w, "iz")) {
        w.push_back('e');
    } else if (ends_double_consonant(w, w.size())) {
        char last = w.back();
        if (last != 'l' && last != 's' && last != 'z') w.pop_back();
    } else if (measure(w, w.size()) == 1 && ends_cvc(w, w.size())) {
        w.push_back('e');
    }
}

void step_1c(std::string& w) {
    if (ends_with(w, "y") && contains_vowel(w, w.size() - 1)) w.back() = 'i';
}

void step_2(std::string& w) {
    static const Rule rules[] = {
        {"ational", "ate", 0}, {"tional", "tion", 0}, {"enci", "ence", 0},
        {"anci", "ance", 0},   {"izer", "ize", 0},    {"abli", "able", 0},
        {"alli", "al", 0},     {"entli", "ent", 0},   {"eli", "e", 0},
        {"ousli", "ous", 0},   {"ization", "ize", 0}, {"ation", "ate", 0},
        {"ator", "ate", 0},    {"alism", "al", 0},    {"iveness", "ive", 0},
        {"fulness", "ful", 0}, {"ousness", "ous", 0}, {"aliti", "al", 0},
        {"iviti", "ive", 0},   {"biliti", "ble", 0},
    };
    apply_rules(w, rules, std::size(rules));
}

void step_3(std::string& w) {
    static const Rule rules[] = {
        {"icate", "ic", 0}, {"ative", "", 0}, {"alize", "al", 0},
        {"iciti", "ic", 0}, {"ical", "ic", 0}, {"ful", "", 0},
        {"ness", "", 0},
    };
    apply_rules(w, rules, std::size(rules));
}

void step_4(std::string& w) {
    static const Rule rules[] = {
        {"al", "", 1},    {"ance", "", 1}, {"ence", "", 1}, {"er", "", 1},
        {"ic", "", 1},    {"able", "", 1}, {"ible", "", 1}, {"ant", "", 1},
        {"ement", "", 1}, {"ment", "", 1}, {"ent", "", 1},  {"ion", "", 1},
        {"ou", "", 1},    {"ism", "", 1},  {"ate", "", 1},  {"iti", "", 1},
        {"ous", "", 1},   {"ive", "", 1},  {"ize", "", 1},
    };
    // "ion" additionally requires the stem to end in s or t.
    size_t best = std::size(rules);
    for (size_t i = 0; i < std::size(rules); ++i) {
        if (ends_with(w, rules[i].s1) &&
            (best == std::size(rules) || rules[i].s1.size() > rules[best].s1.size()))
            best = i;
    }
    if (best == std::size(rules)) return;
    const Rule& r = rules[best];
    size_t stem_len = w.size() - r.s1.size();
    if (r.s1 == "ion" && !(stem_len > 0 && (w[stem_len - 1] == 's' || w[stem_len - 1] == 't')))
        return;
    if (measure(w, stem_len) > 1) w.resize(stem_len);
}

void step_5a(std::string& w) {
    if (!ends_with(w, "e")) return;
    size_t stem_len = w.size() - 1;
    int m = measure(w, stem_len);
    if (m > 1 || (m == 1 && !ends_cvc(w, stem_len))) w.resize(stem_len);
}

void step_5b(std::string& w) {
    if (measure(w, w.size()) > 1 && ends_double_consonant(w, w.size()) && w.back() == 'l')
        w.pop_back();
}

}  // namespace

std::string porter_stem(const std::string& word) {
    // Porter leaves one- and two-letter words untouched.
    if (word.size() <= 2) return word;
    std::string w = word;
    step_1a(w);
    step_1b(w);
    step_1c(w);
    step_2(w);
    step_3(w);
    step_4(w);
    step_5a(w);
    step_5b(w);
    return w;
}

std::string porter_stem_fixpoint(const std::string& word) {
    std::string cur = word;
    for (int i = 0; i < 8; ++i) {
        std::string next = porter_stem(cur);
        if (next == cur) return cur;
        cur = std::move(next);
    }
    return cur;
}

}  // namespace puminer
