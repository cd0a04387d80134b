#pragma once
// The scoring contract: given (context, continuation), return per-token
// natural-log probabilities of the continuation. Three implementations live
// behind it — a wire-protocol client (wire.hpp), an exact-lookup fixture and
// an embedded bigram toy model — plus a per-run memoizing wrapper.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "qshift/core.hpp"

namespace qshift {

struct TokenScores {
    std::vector<double> token_logprobs; // natural log, one per token
    int token_count = 0;                // == token_logprobs.size()
    double total_logprob = 0.0;         // == sum(token_logprobs)
};

inline TokenScores make_token_scores(std::vector<double> logprobs) {
    TokenScores ts;
    ts.token_count = static_cast<int>(logprobs.size());
    ts.total_logprob = 0.0;
    for (double lp : logprobs) ts.total_logprob += lp;
    ts.token_logprobs = std::move(logprobs);
    return ts;
}

class Scorer {
public:
    virtual ~Scorer() = default;

    // Log-probability of `continuation` conditioned on `context`.
    // Deterministic for Fixture and Ngram backends.
    virtual TokenScores score(const std::string& context,
                              const std::string& continuation) const = 0;

    virtual ScorerDescriptor descriptor() const = 0;

    // Elementwise map of score() over the pairs; a per-pair failure is
    // rethrown with the pair index attached.
    std::vector<TokenScores>
    score_batch(const std::vector<std::pair<std::string, std::string>>& pairs) const {
        std::vector<TokenScores> out;
        out.reserve(pairs.size());
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            try {
                out.push_back(score(pairs[i].first, pairs[i].second));
            } catch (const Error& e) {
                throw Error(e.code(),
                            "pair " + std::to_string(i) + ": " + e.what());
            }
        }
        return out;
    }

protected:
    static void require_nonempty(const std::string& continuation) {
        if (continuation.empty())
            throw Error(Errc::ValidationError, "continuation is empty");
    }
};

// --- Fixture: exact (context, continuation) lookup ---------------------------

// File format: JSONL, one record per line:
//   {"context": "...", "continuation": "...", "token_logprobs": [-0.5, ...]}
// Keys match on exact bytes; a repeated key replaces the earlier entry.
class FixtureScorer : public Scorer {
public:
    FixtureScorer() = default;

    static FixtureScorer from_file(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error(Errc::IoError, "cannot open fixture file " + path);
        FixtureScorer fx;
        fx.path_ = path;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
                fx.add(j.at("context").get<std::string>(),
                       j.at("continuation").get<std::string>(),
                       j.at("token_logprobs").get<std::vector<double>>());
            } catch (const nlohmann::json::exception& e) {
                throw Error(Errc::ParseError, path + ":" + std::to_string(lineno) +
                                                  ": " + e.what());
            }
        }
        return fx;
    }

    void add(std::string context, std::string continuation,
             std::vector<double> token_logprobs) {
        table_[{std::move(context), std::move(continuation)}] =
            std::move(token_logprobs);
    }

    std::size_t size() const { return table_.size(); }

    TokenScores score(const std::string& context,
                      const std::string& continuation) const override {
        require_nonempty(continuation);
        auto it = table_.find({context, continuation});
        if (it == table_.end())
            throw Error(Errc::MissingFixtureEntry,
                        "no fixture entry for context \"" + preview(context) +
                            "\" + continuation \"" + preview(continuation) + "\"");
        return make_token_scores(it->second);
    }

    ScorerDescriptor descriptor() const override {
        ScorerDescriptor d;
        d.kind = ScorerKind::Fixture;
        d.target = path_;
        return d;
    }

private:
    static std::string preview(const std::string& s) {
        return s.size() <= 48 ? s : s.substr(0, 45) + "...";
    }

    struct PairHash {
        std::size_t operator()(const std::pair<std::string, std::string>& p) const {
            std::size_t h = std::hash<std::string>()(p.first);
            return h * 1000003ULL ^ std::hash<std::string>()(p.second);
        }
    };

    std::unordered_map<std::pair<std::string, std::string>, std::vector<double>,
                       PairHash>
        table_;
    std::string path_;
};

// --- Ngram: embedded word-bigram toy model ------------------------------------

// Word-level bigram model with add-one smoothing, small enough to brute-force
// in tests. Corpus: plain text, one document per line; tokens are whitespace
// runs. Each document starts from an implicit begin marker, so the first word
// of a continuation scored against an empty context conditions on it.
//
//   P(w | v) = (count(v, w) + 1) / (count(v as predecessor) + V)
//
// V counts distinct corpus words only. Out-of-vocabulary words map to an
// unknown symbol that sits outside V, with zero counts on both sides of the
// formula. token_count is the whitespace token count of the continuation.
class NgramModel {
public:
    explicit NgramModel(const std::string& corpus_text) {
        std::istringstream in(corpus_text);
        std::string line;
        while (std::getline(in, line)) {
            std::vector<int> ids;
            for (const std::string& w : tokenize(line)) ids.push_back(intern(w));
            if (ids.empty()) continue;
            int prev = kBos;
            for (int id : ids) {
                bump(prev, id);
                prev = id;
            }
        }
    }

    static const char* embedded_corpus() {
        static const char* text =
#include "qshift/corpus_embedded.inc"
            ;
        return text;
    }

    static const NgramModel& embedded() {
        static const NgramModel model{std::string(embedded_corpus())};
        return model;
    }

    int vocab_size() const { return static_cast<int>(words_.size()); }
    const std::vector<std::string>& vocabulary() const { return words_; }

    static std::vector<std::string> tokenize(const std::string& text) {
        std::vector<std::string> toks;
        std::string cur;
        for (char c : text) {
            if (std::isspace(static_cast<unsigned char>(c))) {
                if (!cur.empty()) toks.push_back(std::move(cur));
                cur.clear();
            } else {
                cur += c;
            }
        }
        if (!cur.empty()) toks.push_back(std::move(cur));
        return toks;
    }

    // prev == nullopt conditions on the document-start marker.
    double cond_logprob(const std::optional<std::string>& prev,
                        const std::string& next) const {
        int p = prev ? lookup(*prev) : kBos;
        int n = lookup(next);
        int num = bigram_count(p, n) + 1;
        int den = context_count(p) + vocab_size();
        return std::log(static_cast<double>(num) / static_cast<double>(den));
    }

    TokenScores score_tokens(const std::vector<std::string>& context_tokens,
                             const std::vector<std::string>& continuation_tokens) const {
        std::vector<double> lps;
        lps.reserve(continuation_tokens.size());
        std::optional<std::string> prev;
        if (!context_tokens.empty()) prev = context_tokens.back();
        for (const std::string& tok : continuation_tokens) {
            lps.push_back(cond_logprob(prev, tok));
            prev = tok;
        }
        return make_token_scores(std::move(lps));
    }

private:
    static constexpr int kBos = -1; // document start, never predicted
    static constexpr int kUnk = -2; // out-of-vocabulary, outside V

    int intern(const std::string& w) {
        auto it = index_.find(w);
        if (it != index_.end()) return it->second;
        int id = static_cast<int>(words_.size());
        index_.emplace(w, id);
        words_.push_back(w);
        return id;
    }

    int lookup(const std::string& w) const {
        auto it = index_.find(w);
        return it == index_.end() ? kUnk : it->second;
    }

    static std::uint64_t key(int a, int b) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a + 2)) << 32) |
               static_cast<std::uint32_t>(b + 2);
    }

    void bump(int prev, int next) {
        ++bigrams_[key(prev, next)];
        ++contexts_[prev];
    }

    int bigram_count(int prev, int next) const {
        auto it = bigrams_.find(key(prev, next));
        return it == bigrams_.end() ? 0 : it->second;
    }

    int context_count(int prev) const {
        auto it = contexts_.find(prev);
        return it == contexts_.end() ? 0 : it->second;
    }

    std::vector<std::string> words_;
    std::unordered_map<std::string, int> index_;
    std::unordered_map<std::uint64_t, int> bigrams_;
    std::unordered_map<int, int> contexts_;
};

class NgramScorer : public Scorer {
public:
    NgramScorer() : model_(&NgramModel::embedded()) {}

    explicit NgramScorer(std::string corpus_path)
        : owned_(std::make_shared<NgramModel>(read_corpus(corpus_path))),
          model_(owned_.get()), path_(std::move(corpus_path)) {}

    explicit NgramScorer(const NgramModel& model) : model_(&model) {}

    const NgramModel& model() const { return *model_; }

    TokenScores score(const std::string& context,
                      const std::string& continuation) const override {
        require_nonempty(continuation);
        auto cont_tokens = NgramModel::tokenize(continuation);
        if (cont_tokens.empty())
            throw Error(Errc::ValidationError,
                        "continuation has no whitespace-delimited tokens");
        return model_->score_tokens(NgramModel::tokenize(context), cont_tokens);
    }

    ScorerDescriptor descriptor() const override {
        ScorerDescriptor d;
        d.kind = ScorerKind::Ngram;
        d.target = path_; // empty -> embedded corpus
        return d;
    }

private:
    static std::string read_corpus(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw Error(Errc::IoError, "cannot open corpus file " + path);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    std::shared_ptr<NgramModel> owned_;
    const NgramModel* model_;
    std::string path_;
};

// --- Caching wrapper ----------------------------------------------------------

// Memoizes (context, continuation) within a run. Symbols/hybrid runs hit the
// same question-dropped context for every choice, and the two arms of an
// adversarial run share every untouched pair. Thread-safe.
class CachingScorer : public Scorer {
public:
    explicit CachingScorer(const Scorer& inner) : inner_(inner) {}

    TokenScores score(const std::string& context,
                      const std::string& continuation) const override {
        std::pair<std::string, std::string> k{context, continuation};
        {
            std::lock_guard<std::mutex> lock(mu_);
            auto it = cache_.find(k);
            if (it != cache_.end()) {
                ++hits_;
                return it->second;
            }
        }
        TokenScores ts = inner_.score(context, continuation);
        std::lock_guard<std::mutex> lock(mu_);
        ++misses_;
        cache_.emplace(std::move(k), ts);
        return ts;
    }

    ScorerDescriptor descriptor() const override { return inner_.descriptor(); }

    std::size_t hits() const {
        std::lock_guard<std::mutex> lock(mu_);
        return hits_;
    }
    std::size_t misses() const {
        std::lock_guard<std::mutex> lock(mu_);
        return misses_;
    }

private:
    struct PairHash {
        std::size_t operator()(const std::pair<std::string, std::string>& p) const {
            std::size_t h = std::hash<std::string>()(p.first);
            return h * 1000003ULL ^ std::hash<std::string>()(p.second);
        }
    };

    const Scorer& inner_;
    mutable std::mutex mu_;
    mutable std::unordered_map<std::pair<std::string, std::string>, TokenScores,
                               PairHash>
        cache_;
    mutable std::size_t hits_ = 0;
    mutable std::size_t misses_ = 0;
};

} // namespace qshift
