#include <doctest.h>

#include <random>

#include "puminer/text.hpp"
#include "testsupport.hpp"

using namespace puminer;
using testsupport::stopwords;

TEST_CASE("strip keeps inner text of plain tags") {
    CHECK(strip_code_and_html("<p>Hello</p>") == "Hello");
    CHECK(strip_code_and_html("") == "");
    CHECK(strip_code_and_html("no markup at all") == "no markup at all");
}

TEST_CASE("strip removes code blocks entirely") {
    CHECK(strip_code_and_html("<p>use</p><pre><code>SELECT *</code></pre><p>PDO</p>") ==
          "use PDO");
    CHECK(strip_code_and_html("a<code>x = 1</code>b") == "a b");
    CHECK(strip_code_and_html("a<pre>block</pre>b") == "a b");
}

TEST_CASE("strip handles malformed markup best-effort") {
    // unclosed code extends to the end of the enclosing block
    CHECK(strip_code_and_html("keep <code>dropped to end") == "keep");
    CHECK(strip_code_and_html("broken <p tag") == "broken");
    CHECK(strip_code_and_html("1 < 2 and 3 > 2") == "1 < 2 and 3 > 2");
}

TEST_CASE("strip decodes entities and collapses whitespace") {
    CHECK(strip_code_and_html("a &lt;b&gt; &amp; c") == "a <b> & c");
    CHECK(strip_code_and_html("x&#65;y") == "xAy");
    CHECK(strip_code_and_html("  a\n\n b\t c  ") == "a b c");
    // entity-encoded markup is text, not tags
    CHECK(strip_code_and_html("&lt;p&gt;") == "<p>");
}

TEST_CASE("hand-stripped reference fixture") {
    const std::pair<const char*, const char*> fixture[] = {
        {"<p>How can I prevent SQL injection in PHP?</p>",
         "How can I prevent SQL injection in PHP?"},
        {"<p>Use PDO:</p><pre><code>$stmt = $pdo->prepare('SELECT');</code></pre><p>done</p>",
         "Use PDO: done"},
        {"<blockquote><p>quoted advice</p></blockquote>", "quoted advice"},
        {"<p>inline <code>esc()</code> call</p>", "inline call"},
        {"<ul><li>first</li><li>second</li></ul>", "first second"},
        {"<p>a &amp; b</p>", "a & b"},
        {"<p>5 &lt; 6</p>", "5 < 6"},
        {"<h1>Title</h1>text", "Title text"},
        {"<PRE>SHOUTY BLOCK</PRE>tail", "tail"},
        {"<p>nested <strong>bold <em>italic</em></strong></p>", "nested bold italic"},
        {"<a href=\"https://example.com\">link text</a>", "link text"},
        {"<img src=\"x.png\"/>after image", "after image"},
        {"line one<br/>line two", "line one line two"},
        {"<p>multi</p>\n<p>paragraph</p>", "multi paragraph"},
        {"<pre><code>two\nlines</code></pre>rest", "rest"},
        {"<code>a</code><code>b</code>keep", "keep"},
        {"text <!-- comment --> more", "text more"},
        {"<p>tab\there</p>", "tab here"},
        {"&quot;quoted&quot;", "\"quoted\""},
        {"<p>trailing space </p>", "trailing space"},
    };
    for (const auto& [html, expected] : fixture) {
        CAPTURE(html);
        CHECK(strip_code_and_html(html) == expected);
    }
}

TEST_CASE("tokenize lowercases, stems, keeps compounds") {
    auto toks = tokenize_normalize("Attacks attack", stopwords());
    REQUIRE(toks.size() == 2);
    CHECK(toks[0] == "attack");
    CHECK(toks[1] == "attack");

    CHECK(tokenize_normalize("x.509 private-key", stopwords()) ==
          std::vector<std::string>{"x.509", "private-kei"});
    CHECK(tokenize_normalize("", stopwords()).empty());
    CHECK(tokenize_normalize("the of and", stopwords()).empty());
}

TEST_CASE("token boundary rule") {
    CHECK(tokenize_normalize("sql-injection", stopwords()) ==
          std::vector<std::string>{"sql-inject"});
    // leading/trailing joiners split; interior ones survive
    CHECK(tokenize_normalize("-dash end.", stopwords()) ==
          std::vector<std::string>{"dash", "end"});
    CHECK(tokenize_normalize("a_b c__d", stopwords()) ==
          std::vector<std::string>{"a_b", "c"});  // "c__d" splits, "d" is a stopword
    CHECK(tokenize_normalize("don't", stopwords()).empty());  // don + t, both stopwords
}

TEST_CASE("short tokens are never stemmed") {
    CHECK(stem_token("aes") == "aes");
    CHECK(stem_token("md5") == "md5");
    CHECK(stem_token("dos") == "dos");
    CHECK(stem_token("virus") == "viru");
}

TEST_CASE("phrase joiner fuses adjacent lexicon words") {
    PhraseJoiner joiner;
    joiner.add({"sql", "inject"});
    joiner.add({"buffer", "overflow"});
    joiner.finalize();
    auto toks = tokenize_normalize("prevent sql injection attacks", stopwords(), &joiner);
    CHECK(toks == std::vector<std::string>{"prevent", "sql-inject", "attack"});
}

TEST_CASE("tokenize is idempotent") {
    const char* samples[] = {
        "Improper synchronisation of threads causes data breaches",
        "Doings and willings, oscillators generalizations",
        "x.509 private-key sql-injection attacks",
        "The quick brown fox jumps over the lazy dog",
        "use after free vulnerabilities in C++ code",
    };
    for (const char* s : samples) {
        CAPTURE(s);
        auto once = tokenize_normalize(s, stopwords(), &testsupport::lexicon().phrase_joiner());
        std::string joined;
        for (const auto& t : once) {
            if (!joined.empty()) joined += ' ';
            joined += t;
        }
        auto twice = tokenize_normalize(joined, stopwords(), &testsupport::lexicon().phrase_joiner());
        CHECK(once == twice);
    }
}

TEST_CASE("order preservation and determinism") {
    std::mt19937_64 rng(7);
    std::vector<std::string> words = {"alpha", "bravo", "charlie", "delta", "echo",
                                      "hashing", "tokens", "attacks", "filter", "zebra"};
    for (int trial = 0; trial < 20; ++trial) {
        std::string text;
        std::vector<std::string> picked;
        for (int i = 0; i < 12; ++i) {
            const auto& w = words[rng() % words.size()];
            picked.push_back(w);
            text += w + " ";
        }
        auto a = tokenize_normalize(text, stopwords());
        auto b = tokenize_normalize(text, stopwords());
        CHECK(a == b);
        // surviving tokens appear in source order
        size_t pos = 0;
        bool ordered = true;
        for (const auto& t : a) {
            bool found = false;
            for (; pos < picked.size(); ++pos) {
                if (stem_token(picked[pos]) == t) {
                    found = true;
                    ++pos;
                    break;
                }
            }
            if (!found) ordered = false;
        }
        CHECK(ordered);
    }
}

TEST_CASE("no output token is a stopword") {
    auto toks = tokenize_normalize(
        "doings willingly being was the doing of a willing user", stopwords());
    for (const auto& t : toks) {
        CAPTURE(t);
        CHECK_FALSE(stopwords().contains(t));
    }
}

TEST_CASE("preprocess_post concatenates title question answers") {
    RawPost post;
    post.id = 42;
    post.source = Source::StackOverflow;
    post.title = "Preventing attacks";
    post.question_html = "<p>How to sanitize input?</p>";
    post.answers_html = {"<p>Use filters</p>", "<pre><code>code only</code></pre>"};
    post.tags = {"PHP ", "Security"};

    CleanPost clean = preprocess_post(post, stopwords());
    CHECK(clean.id == 42);
    CHECK(clean.tags == std::vector<std::string>{"php", "security"});
    CHECK(clean.token_count == clean.tokens.size());
    CHECK(clean.tokens == std::vector<std::string>{"prevent", "attack", "sanit", "input",
                                                   "use", "filter"});
}

TEST_CASE("empty post and code-only bodies") {
    RawPost post;
    post.id = 1;
    CleanPost clean = preprocess_post(post, stopwords());
    CHECK(clean.token_count == 0);

    RawPost code_only;
    code_only.id = 2;
    code_only.title = "compile error";
    code_only.question_html = "<pre><code>int main() { return 0; }</code></pre>";
    CleanPost c2 = preprocess_post(code_only, stopwords());
    CHECK(c2.tokens == std::vector<std::string>{"compil", "error"});
}

TEST_CASE("token counts match an independent recount over 50 posts") {
    std::mt19937_64 rng(11);
    std::vector<std::string> vocab = {"server", "client", "request", "token",  "header",
                                      "parser", "stream", "buffer",  "layout", "switch"};
    for (int p = 0; p < 50; ++p) {
        RawPost post;
        post.id = p;
        auto make_text = [&](int n) {
            std::string t;
            for (int i = 0; i < n; ++i) t += vocab[rng() % vocab.size()] + " ";
            return t;
        };
        post.title = make_text(int(rng() % 5));
        post.question_html = make_text(int(rng() % 20));
        int answers = int(rng() % 3);
        for (int a = 0; a < answers; ++a) post.answers_html.push_back(make_text(int(rng() % 10)));

        CleanPost clean = preprocess_post(post, stopwords());
        size_t expected = tokenize_normalize(post.title, stopwords()).size() +
                          tokenize_normalize(post.question_html, stopwords()).size();
        for (const auto& a : post.answers_html)
            expected += tokenize_normalize(a, stopwords()).size();
        CHECK(clean.token_count == expected);
    }
}

TEST_CASE("stopword list loads with hash") {
    CHECK(stopwords().size() > 100);
    CHECK(stopwords().contains("the"));
    CHECK(stopwords().sha256().size() == 64);
    CHECK_FALSE(stopwords().contains("security"));
}
