#include "imbalab/bench.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include <json.hpp>

#include "imbalab/errors.hpp"

namespace imbalab::bench {

void ConceptVocabulary::build_index() {
    index_.clear();
    for (const auto& c : concepts) index_.insert(c);
}

ConceptVocabulary ConceptVocabulary::from_words(std::vector<std::string> words) {
    ConceptVocabulary v;
    for (auto& w : words) {
        std::transform(w.begin(), w.end(), w.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        if (w.empty()) throw ConfigError("vocabulary: empty concept entry");
        if (std::find(v.concepts.begin(), v.concepts.end(), w) == v.concepts.end())
            v.concepts.push_back(w);
    }
    if (v.concepts.empty()) throw ConfigError("vocabulary: no concepts");
    v.build_index();
    return v;
}

ConceptVocabulary ConceptVocabulary::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open vocabulary: " + path);
    std::vector<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        if (!line.empty()) words.push_back(line);
    }
    return from_words(std::move(words));
}

long ConceptGraph::frequency(const std::string& c) const {
    const auto it = freq.find(c);
    return it == freq.end() ? 0 : it->second;
}

long ConceptGraph::edge(const std::string& a, const std::string& b) const {
    const auto key = a < b ? std::make_pair(a, b) : std::make_pair(b, a);
    const auto it = edges.find(key);
    return it == edges.end() ? 0 : it->second;
}

void ConceptGraph::add_caption(const std::vector<std::string>& present) {
    caption_count += 1;
    for (const auto& c : present) freq[c] += 1;
    for (size_t i = 0; i < present.size(); ++i)
        for (size_t j = i + 1; j < present.size(); ++j) {
            const auto key = present[i] < present[j] ? std::make_pair(present[i], present[j])
                                                     : std::make_pair(present[j], present[i]);
            edges[key] += 1;
        }
}

void ConceptGraph::merge(const ConceptGraph& other) {
    caption_count += other.caption_count;
    for (const auto& [c, f] : other.freq) freq[c] += f;
    for (const auto& [key, w] : other.edges) edges[key] += w;
}

std::vector<std::string> tokenize(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : line) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

ConceptGraph ingest_corpus(std::istream& in, const ConceptVocabulary& vocab) {
    if (vocab.concepts.empty()) throw ConfigError("ingest: vocabulary is empty");
    ConceptGraph g;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (in.bad()) throw IoError("ingest: read failure at line " + std::to_string(line_no));
        // set semantics: each concept counts once per caption
        std::vector<std::string> present;
        for (const auto& tok : tokenize(line))
            if (vocab.contains(tok) &&
                std::find(present.begin(), present.end(), tok) == present.end())
                present.push_back(tok);
        std::sort(present.begin(), present.end());
        g.add_caption(present);
    }
    if (in.bad()) throw IoError("ingest: read failure at line " + std::to_string(line_no + 1));
    return g;
}

ConceptGraph ingest_corpus_file(const std::string& path, const ConceptVocabulary& vocab) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus: " + path);
    return ingest_corpus(in, vocab);
}

std::pair<std::vector<std::string>, std::vector<std::string>> split_head_tail(
    const ConceptGraph& graph, double ratio_threshold) {
    if (graph.freq.empty()) throw InputError("split_head_tail: graph is empty");
    if (!(ratio_threshold > 0.0)) throw ConfigError("split_head_tail: threshold must be > 0");

    // Tail cutoff: lower-median frequency of the bottom quartile (at least
    // one concept), over concepts sorted by (frequency, name).
    std::vector<std::pair<long, std::string>> by_freq;
    for (const auto& [c, f] : graph.freq) by_freq.push_back({f, c});
    std::sort(by_freq.begin(), by_freq.end());
    const size_t q = std::max<size_t>(1, by_freq.size() / 4);
    const long cutoff = by_freq[(q - 1) / 2].first;

    std::vector<std::string> head, tail;
    for (const auto& [f, c] : by_freq) {
        if (f <= cutoff) tail.push_back(c);
        else if (static_cast<double>(f) > ratio_threshold * static_cast<double>(cutoff))
            head.push_back(c);
    }
    if (head.empty() || tail.empty()) return {{}, {}};
    std::sort(head.begin(), head.end());
    std::sort(tail.begin(), tail.end());
    return {head, tail};
}

std::vector<std::string> select_representatives(const std::vector<std::string>& pool,
                                                const ConceptGraph& graph, int n) {
    if (n < 0) throw InputError("select_representatives: n must be >= 0");
    if (static_cast<int>(pool.size()) < n)
        throw InputError("select_representatives: pool has " + std::to_string(pool.size()) +
                         " concepts, need " + std::to_string(n) + " (short by " +
                         std::to_string(n - static_cast<long>(pool.size())) + ")");
    std::vector<std::string> sorted = pool;
    std::sort(sorted.begin(), sorted.end(), [&](const std::string& a, const std::string& b) {
        const long fa = graph.frequency(a), fb = graph.frequency(b);
        if (fa != fb) return fa > fb;
        return a < b;
    });
    sorted.resize(n);
    return sorted;
}

std::vector<ConceptPair> topk_min_edges(const ConceptGraph& graph,
                                        const std::vector<std::string>& heads,
                                        const std::vector<std::string>& tails, int k) {
    const long total = static_cast<long>(heads.size()) * static_cast<long>(tails.size());
    if (k < 0 || k > total)
        throw InputError("topk_min_edges: k=" + std::to_string(k) + " exceeds pair count " +
                         std::to_string(total));
    std::vector<ConceptPair> pairs;
    pairs.reserve(total);
    for (const auto& h : heads)
        for (const auto& t : tails) pairs.push_back({h, t, graph.edge(h, t)});
    std::sort(pairs.begin(), pairs.end(), [](const ConceptPair& a, const ConceptPair& b) {
        if (a.weight != b.weight) return a.weight < b.weight;
        if (a.head != b.head) return a.head < b.head;
        return a.tail < b.tail;
    });
    pairs.resize(k);
    return pairs;
}

std::vector<std::string> gen_prompts(const ConceptPair& pair,
                                     const std::vector<std::string>& templates) {
    if (templates.size() < 5)
        throw ConfigError("gen_prompts: need at least 5 templates, got " +
                          std::to_string(templates.size()));
    auto substitute = [](std::string s, const std::string& slot, const std::string& value) {
        size_t pos = 0;
        while ((pos = s.find(slot, pos)) != std::string::npos) {
            s.replace(pos, slot.size(), value);
            pos += value.size();
        }
        return s;
    };
    std::vector<std::string> out;
    out.reserve(5);
    for (int i = 0; i < 5; ++i) {
        std::string p = substitute(templates[i], "{head}", pair.head);
        out.push_back(substitute(std::move(p), "{tail}", pair.tail));
    }
    return out;
}

std::vector<std::string> load_templates(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open templates: " + path);
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

std::string BenchmarkSpec::to_json() const {
    nlohmann::json j;
    j["version"] = 1;
    j["corpus"] = corpus_id;
    j["params"] = {{"n", n}, {"k", k}, {"threshold", threshold}};
    j["pairs"] = nlohmann::json::array();
    for (const auto& p : pairs)
        j["pairs"].push_back({{"head", p.head}, {"tail", p.tail}, {"weight", p.weight}});
    j["prompts"] = prompts;
    return j.dump(2) + "\n";
}

void BenchmarkSpec::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write benchmark spec: " + path);
    out << to_json();
}

BenchmarkSpec build_benchmark(const std::string& corpus_path, const ConceptVocabulary& vocab,
                              const std::vector<std::string>& templates, int n, int k,
                              double threshold) {
    if (n < 1) throw ConfigError("build_benchmark: n must be >= 1");
    if (k > n * n)
        throw InputError("build_benchmark: k=" + std::to_string(k) + " exceeds n^2=" +
                         std::to_string(n * n));
    const ConceptGraph graph = ingest_corpus_file(corpus_path, vocab);
    const auto [head_pool, tail_pool] = split_head_tail(graph, threshold);
    const auto heads = select_representatives(head_pool, graph, n);
    const auto tails = select_representatives(tail_pool, graph, n);
    BenchmarkSpec spec;
    spec.pairs = topk_min_edges(graph, heads, tails, k);
    for (const auto& p : spec.pairs) {
        const auto prompts = gen_prompts(p, templates);
        spec.prompts.insert(spec.prompts.end(), prompts.begin(), prompts.end());
    }
    spec.n = n;
    spec.k = k;
    spec.threshold = threshold;
    spec.corpus_id = corpus_path.substr(corpus_path.find_last_of('/') + 1);
    return spec;
}

} // namespace imbalab::bench
