#pragma once

#include <istream>
#include <map>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace imbalab::bench {

/// Concepts recognized during corpus ingestion; lowercase, unique,
/// insertion-ordered.
struct ConceptVocabulary {
    std::vector<std::string> concepts;

    static ConceptVocabulary load(const std::string& path);
    static ConceptVocabulary from_words(std::vector<std::string> words);
    bool contains(const std::string& w) const { return index_.count(w) > 0; }

private:
    std::unordered_set<std::string> index_;
    void build_index();
};

/// Concept frequencies plus caption-level co-occurrence counts. Edge keys
/// are canonical (lexicographically smaller concept first).
struct ConceptGraph {
    std::map<std::string, long> freq;
    std::map<std::pair<std::string, std::string>, long> edges;
    long caption_count = 0;

    long frequency(const std::string& c) const;
    long edge(const std::string& a, const std::string& b) const;
    void add_caption(const std::vector<std::string>& present);
    /// Count-sum merge; commutative, so sharded ingestion is order-free.
    void merge(const ConceptGraph& other);
};

/// Lowercases and splits into maximal alphanumeric runs.
std::vector<std::string> tokenize(const std::string& line);

/// Streams captions (one per line); a concept counts once per caption.
ConceptGraph ingest_corpus(std::istream& in, const ConceptVocabulary& vocab);
ConceptGraph ingest_corpus_file(const std::string& path, const ConceptVocabulary& vocab);

/// Splits concepts into head/tail pools such that every head frequency
/// exceeds every tail frequency by a factor > ratio_threshold. The tail
/// cutoff is the lower-median frequency of the bottom quartile. A split
/// with either pool empty yields two empty pools.
std::pair<std::vector<std::string>, std::vector<std::string>> split_head_tail(
    const ConceptGraph& graph, double ratio_threshold = 100.0);

/// Top-n pool members by frequency, ties broken lexicographically.
std::vector<std::string> select_representatives(const std::vector<std::string>& pool,
                                                const ConceptGraph& graph, int n);

struct ConceptPair {
    std::string head;
    std::string tail;
    long weight = 0;
};

/// All head x tail pairs ranked by ascending co-occurrence (missing edge =
/// 0), ties lexicographic; first k returned.
std::vector<ConceptPair> topk_min_edges(const ConceptGraph& graph,
                                        const std::vector<std::string>& heads,
                                        const std::vector<std::string>& tails, int k);

/// Instantiates the first five templates with the pair; templates carry
/// {head} and {tail} slots.
std::vector<std::string> gen_prompts(const ConceptPair& pair,
                                     const std::vector<std::string>& templates);

std::vector<std::string> load_templates(const std::string& path);

struct BenchmarkSpec {
    std::vector<ConceptPair> pairs;
    std::vector<std::string> prompts; // 5 per pair, pair-major
    int n = 0;
    int k = 0;
    double threshold = 100.0;
    std::string corpus_id;

    std::string to_json() const;
    void save(const std::string& path) const;
};

/// The full pipeline: ingest -> split -> representatives -> min-edge pairs
/// -> prompts.
BenchmarkSpec build_benchmark(const std::string& corpus_path, const ConceptVocabulary& vocab,
                              const std::vector<std::string>& templates, int n, int k,
                              double threshold = 100.0);

} // namespace imbalab::bench
