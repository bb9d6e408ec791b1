// Synthetic desk-scale corpus. Every dataset's gold output is a
// deterministic function of its input, so a memorizing model can reach
// perfect scores; held-out datasets draw unseen combinations and act as
// genuine OOD probes (mirroring the TCR / Causal-TB / R8 trio).
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gkg/corpus.hpp"
#include "gkg/rng.hpp"
#include "gkg/types.hpp"

namespace gkg {

struct ToySpec {
    int train_per_family = 240;
    int test_per_family = 56;
    int held_out_test = 20;  // per held-out dataset

    void validate() const {
        if (train_per_family <= 0 || test_per_family <= 0 || held_out_test <= 0)
            throw UsageError("toy sizes must be positive");
    }
};

struct ToyData {
    SplitManifest manifest;
    std::map<std::string, std::vector<std::string>> raw_rows;  // key -> TSV rows
    std::vector<InstructionPool> pools;

    const InstructionPool& pool_for(const std::string& task_code) const {
        for (const auto& p : pools)
            if (p.task_code == task_code) return p;
        throw std::runtime_error("no toy instruction pool for task " + task_code);
    }
};

namespace toy_detail {

inline const std::vector<std::string>& people() {
    static const std::vector<std::string> v = {"alice", "bob",   "carol", "dave", "erin",
                                               "frank", "grace", "heidi", "ivan", "judy"};
    return v;
}
inline const std::vector<std::string>& relations() {
    static const std::vector<std::string> v = {"works_at", "lives_in", "founded", "leads",
                                               "advises"};
    return v;
}
inline const std::vector<std::string>& orgs() {
    static const std::vector<std::string> v = {"acme",     "globex",  "initech", "hooli",
                                               "umbrella", "aperture", "soylent", "wonka"};
    return v;
}
inline const std::vector<std::string>& fillers() {
    static const std::vector<std::string> v = {"the weather stayed mild", "markets were calm",
                                               "no other news",           "the fair drew crowds",
                                               "traffic was light",       "the council met"};
    return v;
}

struct Topic {
    std::string label;
    std::vector<std::string> words;
};
inline const std::vector<Topic>& topics() {
    static const std::vector<Topic> v = {
        {"SPORTS", {"football", "tennis", "cricket", "rowing"}},
        {"FOOD", {"pasta", "bread", "cheese", "mango"}},
        {"TECH", {"laptop", "robot", "compiler", "server"}}};
    return v;
}

inline std::string tsv(const std::string& input, const std::string& output) {
    return input + "\t" + output;
}

inline std::string triple(const std::string& a, const std::string& r, const std::string& b) {
    return "<" + a + ", " + r + ", " + b + ">";
}

// KG/SRE: "alice works_at acme ." -> "<alice, works_at, acme>"
inline std::string sre_row(KeyedRng& rng) {
    const auto& p = people()[rng.next_below(people().size())];
    const auto& r = relations()[rng.next_below(relations().size())];
    const auto& o = orgs()[rng.next_below(orgs().size())];
    return tsv(p + " " + r + " " + o + " .", triple(p, r, o));
}

// KG/JERE: two facts, two triples joined by "; ".
inline std::string jere_row(KeyedRng& rng) {
    const auto& p1 = people()[rng.next_below(people().size())];
    const auto& r1 = relations()[rng.next_below(relations().size())];
    const auto& o1 = orgs()[rng.next_below(orgs().size())];
    const auto& p2 = people()[rng.next_below(people().size())];
    const auto& r2 = relations()[rng.next_below(relations().size())];
    const auto& o2 = orgs()[rng.next_below(orgs().size())];
    return tsv(p1 + " " + r1 + " " + o1 + " and " + p2 + " " + r2 + " " + o2 + " .",
               triple(p1, r1, o1) + "; " + triple(p2, r2, o2));
}

// EKG/ETRE: "E1 happened before E2" -> "BEFORE"
inline std::string etre_row(KeyedRng& rng, int event_base) {
    int a = event_base + static_cast<int>(rng.next_below(12));
    int b = event_base + static_cast<int>(rng.next_below(12));
    if (b == a) b = event_base + (b - event_base + 1) % 12;
    bool before = rng.next_below(2) == 0;
    std::string word = before ? "before" : "after";
    return tsv("E" + std::to_string(a) + " happened " + word + " E" + std::to_string(b),
               before ? "BEFORE" : "AFTER");
}

// EKG/ECRE (held-out only): "E4 triggered E9" -> "CAUSE"
inline std::string ecre_row(KeyedRng& rng) {
    int a = 1 + static_cast<int>(rng.next_below(12));
    int b = 1 + static_cast<int>(rng.next_below(12));
    if (b == a) b = 1 + b % 12;
    bool causal = rng.next_below(2) == 0;
    std::string word = causal ? "triggered" : "coincided with";
    return tsv("E" + std::to_string(a) + " " + word + " E" + std::to_string(b),
               causal ? "CAUSE" : "NONE");
}

// CKG/TC: keyword -> topic label.
inline std::string tc_row(KeyedRng& rng, bool held_out_template) {
    const auto& topic = topics()[rng.next_below(topics().size())];
    const auto& word = topic.words[rng.next_below(topic.words.size())];
    std::string input = held_out_template ? "news today about " + word + " ."
                                          : "the article covers " + word + " .";
    return tsv(input, topic.label);
}

// CKG/AG: lead sentence + filler; the summary is the lead sentence.
inline std::string ag_row(KeyedRng& rng) {
    const auto& p = people()[rng.next_below(people().size())];
    const auto& r = relations()[rng.next_below(relations().size())];
    const auto& o = orgs()[rng.next_below(orgs().size())];
    const auto& filler = fillers()[rng.next_below(fillers().size())];
    std::string lead = p + " " + r + " " + o;
    return tsv(lead + " . " + filler + " .", lead);
}

// Counter/NLG: triple back to a sentence (inverse of SRE).
inline std::string nlg_row(KeyedRng& rng) {
    const auto& p = people()[rng.next_below(people().size())];
    const auto& r = relations()[rng.next_below(relations().size())];
    const auto& o = orgs()[rng.next_below(orgs().size())];
    return tsv(triple(p, r, o), p + " " + r + " " + o + " .");
}

inline InstructionPool make_pool(std::string task, std::vector<std::string> templates) {
    InstructionPool pool;
    pool.task_code = std::move(task);
    pool.templates = std::move(templates);
    pool.validate();
    return pool;
}

inline std::vector<InstructionPool> toy_pools() {
    std::vector<InstructionPool> pools;
    pools.push_back(make_pool(
        "SRE", {"Extract the relation triple.", "List the relation triple.", "Identify the stated triple.", "Find the entity relation triple.", "Give the knowledge triple.", "Pull out the relation triple.", "State the encoded triple.", "Produce the sentence's triple.", "Return the relation triple.", "Write the expressed triple."}));
    pools.push_back(make_pool(
        "JERE", {"Extract every relation triple.", "List all stated triples.", "Identify each entity triple.", "Find all relations and entities.", "Give every knowledge triple.", "Pull out all relation triples.", "State each encoded triple.", "Produce all triples.", "Return every triple found.", "Write all expressed triples."}));
    pools.push_back(make_pool(
        "ETRE", {"Decide the temporal order.", "Classify the event order.", "Which event came first?", "Label the pair BEFORE or AFTER.", "Determine the event order.", "State the temporal relation.", "Judge the order of events.", "Output the temporal label.", "Give the time order.", "Identify the temporal relation."}));
    pools.push_back(make_pool(
        "ECRE", {"Decide if the first event caused it.", "Classify the causal relation.", "Label the pair CAUSE or NONE.", "Determine if a cause is described.", "State the causal relation.", "Judge whether causally related.", "Output the causal label.", "Give the causal relation.", "Identify the causal relation.", "Is a causal relation expressed?"}));
    pools.push_back(make_pool(
        "TC", {"Classify the topic.", "Assign the topic category.", "Label the passage's topic.", "Which topic is discussed?", "Output the topic label.", "Determine the text category.", "Name the topic discussed.", "Give the topic class.", "Tag the text's topic.", "Identify the topic."}));
    pools.push_back(make_pool(
        "AG", {"Summarize in one sentence.", "Write a one-sentence abstract.", "Produce a short summary.", "Condense to a single sentence.", "Give the key sentence.", "Generate a brief abstract.", "State the main point.", "Compress to one sentence.", "Write the summary sentence.", "Abstract the passage briefly."}));
    pools.push_back(make_pool(
        "NLG", {"Verbalize the triple.", "Write the triple as a sentence.", "Turn the triple into text.", "Generate text for the triple.", "Describe the triple briefly.", "Render the triple as a sentence.", "Convert the triple to text.", "Produce the triple's sentence.", "State the triple as text.", "Express the triple in words."}));
    return pools;
}

}  // namespace toy_detail

// Emits the raw rows, manifest and instruction pools for the synthetic
// corpus. Same (spec, seed) twice gives byte-identical rows. In-domain test
// rows re-draw inputs already seen in training; held-out rows are fresh.
inline ToyData generate_toy_corpus(const ToySpec& spec, std::uint64_t seed) {
    using namespace toy_detail;
    spec.validate();

    ToyData data;
    data.manifest.seed = seed;
    data.pools = toy_pools();

    auto add_dataset = [&](GraphFamily family, const std::string& task, const std::string& name,
                           bool held_out, int train_n, int test_n,
                           const std::function<std::string(KeyedRng&)>& make_row) {
        ManifestEntry entry;
        entry.descriptor.family = family;
        entry.descriptor.task_code = task;
        entry.descriptor.dataset_name = name;
        entry.descriptor.metric = metric_for_task(task);
        entry.descriptor.held_out = held_out;
        entry.train_count = held_out ? 0 : train_n;
        entry.test_count = test_n;
        entry.raw_path = "raw/" + entry.descriptor.key() + ".tsv";

        KeyedRng rng(seed, "toy:" + entry.descriptor.key());
        std::vector<std::string> rows;
        rows.reserve(static_cast<std::size_t>(entry.train_count + test_n));
        for (std::int64_t i = 0; i < entry.train_count; ++i) rows.push_back(make_row(rng));
        for (int i = 0; i < test_n; ++i) {
            if (held_out || rows.empty()) {
                rows.push_back(make_row(rng));
            } else {
                // Re-use a training row's content so memorization suffices.
                rows.push_back(rows[rng.next_below(static_cast<std::size_t>(entry.train_count))]);
            }
        }
        data.raw_rows[entry.descriptor.key()] = std::move(rows);
        data.manifest.entries.push_back(std::move(entry));
    };

    const int t = spec.train_per_family;
    const int v = spec.test_per_family;
    const int sre_t = (2 * t + 1) / 3, sre_v = (2 * v + 1) / 3;
    const int tc_t = t / 2, tc_v = v / 2;

    add_dataset(GraphFamily::KG, "SRE", "toy_news", false, sre_t, sre_v, sre_row);
    add_dataset(GraphFamily::KG, "JERE", "toy_joint", false, t - sre_t, v - sre_v, jere_row);
    add_dataset(GraphFamily::EKG, "ETRE", "toy_order", false, t, v,
                [](KeyedRng& rng) { return etre_row(rng, 1); });
    add_dataset(GraphFamily::EKG, "ETRE", "toy_tcr", true, 0, spec.held_out_test,
                [](KeyedRng& rng) { return etre_row(rng, 20); });
    add_dataset(GraphFamily::EKG, "ECRE", "toy_causal", true, 0, spec.held_out_test, ecre_row);
    add_dataset(GraphFamily::CKG, "TC", "toy_topics", false, tc_t, tc_v,
                [](KeyedRng& rng) { return tc_row(rng, false); });
    add_dataset(GraphFamily::CKG, "AG", "toy_digest", false, t - tc_t, v - tc_v, ag_row);
    add_dataset(GraphFamily::CKG, "TC", "toy_r8", true, 0, spec.held_out_test,
                [](KeyedRng& rng) { return tc_row(rng, true); });
    add_dataset(GraphFamily::Counter, "NLG", "toy_graph2text", false, t, v, nlg_row);

    data.manifest.validate();
    return data;
}

}  // namespace gkg
