#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "bcp/triple.hpp"

namespace bcp {

// Malformed input line; line() is the 1-based line number in the stream.
class parse_error : public std::runtime_error {
public:
    parse_error(const std::string& msg, std::size_t line)
        : std::runtime_error(msg + " (line " + std::to_string(line) + ")"),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// One fact still in string space, straight off a data file.
struct StringTriple {
    std::string subject;
    std::string relation;
    std::string object;
};

// Reads tab-separated "subject\trelation\tobject" lines. Blank lines are
// skipped; a trailing carriage return is tolerated. Anything else with the
// wrong field count, or an empty field, raises parse_error.
inline std::vector<StringTriple> parse_triples(std::istream& in) {
    std::vector<StringTriple> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        const std::size_t tab1 = line.find('\t');
        if (tab1 == std::string::npos)
            throw parse_error("expected 3 tab-separated fields, got 1", line_no);
        const std::size_t tab2 = line.find('\t', tab1 + 1);
        if (tab2 == std::string::npos)
            throw parse_error("expected 3 tab-separated fields, got 2", line_no);
        if (line.find('\t', tab2 + 1) != std::string::npos)
            throw parse_error("expected 3 tab-separated fields, got more", line_no);

        StringTriple t;
        t.subject = line.substr(0, tab1);
        t.relation = line.substr(tab1 + 1, tab2 - tab1 - 1);
        t.object = line.substr(tab2 + 1);
        if (t.subject.empty() || t.relation.empty() || t.object.empty())
            throw parse_error("empty field", line_no);
        out.push_back(std::move(t));
    }
    return out;
}

// Integer-id view of a dataset: vocabulary, the three splits, and a hash
// index over every fact seen anywhere (used for filtered ranking).
//
// Ids are assigned in first-appearance order scanning train, then valid,
// then test, so a fixed input yields a fixed id space. With augment enabled
// each training fact is immediately followed by its inverse, and the inverse
// relation ids [N_r, 2*N_r) come into play.
class KnowledgeGraph {
public:
    std::vector<Triple> train;
    std::vector<Triple> valid;
    std::vector<Triple> test;

    std::int32_t num_entities() const { return static_cast<std::int32_t>(entity_names_.size()); }
    std::int32_t num_relations() const { return static_cast<std::int32_t>(relation_names_.size()); }
    std::int32_t num_relation_rows() const { return 2 * num_relations(); }
    bool augmented() const { return augmented_; }

    // Facts dropped as exact duplicates within their split.
    std::size_t duplicates_dropped() const { return duplicates_dropped_; }
    // Vocabulary entries (entities plus relations) first seen outside train.
    std::size_t unseen_in_train() const { return unseen_in_train_; }

    const std::vector<std::string>& entity_names() const { return entity_names_; }
    const std::vector<std::string>& relation_names() const { return relation_names_; }

    const std::unordered_map<std::string, std::int32_t>& entity_ids() const { return entity_ids_; }
    const std::unordered_map<std::string, std::int32_t>& relation_ids() const { return relation_ids_; }

    // Display name for any relation row, inverse rows carrying the "_inv"
    // suffix. Construction guarantees the suffixed names are collision-free.
    std::string relation_display_name(std::int32_t rel) const {
        if (rel < 0 || rel >= num_relation_rows())
            throw std::out_of_range("relation id out of range");
        const std::int32_t nr = num_relations();
        return rel < nr ? relation_names_[rel] : relation_names_[rel - nr] + "_inv";
    }

    // Whether the fact occurs in any split (inverses of train facts count;
    // both orientations of valid/test facts count). Out-of-range ids throw.
    bool is_known(const Triple& t) const {
        check_ids(t);
        return filter_.count(key(t)) != 0;
    }

    // "id\tname" per entity.
    void write_entity_vocab(std::ostream& os) const {
        for (std::size_t i = 0; i < entity_names_.size(); ++i)
            os << i << '\t' << entity_names_[i] << '\n';
    }

    // "id\tname" per relation row, inverse rows included.
    void write_relation_vocab(std::ostream& os) const {
        const std::int32_t rows = num_relation_rows();
        for (std::int32_t k = 0; k < rows; ++k)
            os << k << '\t' << relation_display_name(k) << '\n';
    }

    friend KnowledgeGraph build_graph(const std::vector<StringTriple>& train,
                                      const std::vector<StringTriple>& valid,
                                      const std::vector<StringTriple>& test,
                                      bool augment);

private:
    void check_ids(const Triple& t) const {
        if (t.subject < 0 || t.subject >= num_entities() ||
            t.object < 0 || t.object >= num_entities())
            throw std::out_of_range("entity id out of range");
        if (t.relation < 0 || t.relation >= num_relation_rows())
            throw std::out_of_range("relation id out of range");
    }

    // 64-bit key: relation in the top 16 bits, entities in 24 bits each.
    // build_graph enforces the implied vocabulary caps, which hold with a
    // couple orders of magnitude to spare for every dataset this targets.
    std::uint64_t key(const Triple& t) const {
        return (static_cast<std::uint64_t>(t.relation) << 48) |
               (static_cast<std::uint64_t>(t.subject) << 24) |
               static_cast<std::uint64_t>(t.object);
    }

    std::vector<std::string> entity_names_;
    std::vector<std::string> relation_names_;
    std::unordered_map<std::string, std::int32_t> entity_ids_;
    std::unordered_map<std::string, std::int32_t> relation_ids_;
    std::unordered_set<std::uint64_t> filter_;
    bool augmented_ = false;
    std::size_t duplicates_dropped_ = 0;
    std::size_t unseen_in_train_ = 0;
};

// Assembles the id space, deduplicates each split, optionally augments train
// with inverse facts, and builds the known-fact index. Relation names that
// would collide with a generated "_inv" name are rejected up front.
inline KnowledgeGraph build_graph(const std::vector<StringTriple>& train,
                                  const std::vector<StringTriple>& valid,
                                  const std::vector<StringTriple>& test,
                                  bool augment) {
    KnowledgeGraph g;
    g.augmented_ = augment;

    bool in_train = true;
    auto entity_id = [&](const std::string& name) {
        auto [it, inserted] = g.entity_ids_.try_emplace(
            name, static_cast<std::int32_t>(g.entity_names_.size()));
        if (inserted) {
            if (g.entity_names_.size() >= (1u << 24))
                throw std::invalid_argument("entity vocabulary exceeds 2^24");
            g.entity_names_.push_back(name);
            if (!in_train) ++g.unseen_in_train_;
        }
        return it->second;
    };
    auto relation_id = [&](const std::string& name) {
        auto [it, inserted] = g.relation_ids_.try_emplace(
            name, static_cast<std::int32_t>(g.relation_names_.size()));
        if (inserted) {
            if (g.relation_names_.size() >= (1u << 15))
                throw std::invalid_argument("relation vocabulary exceeds 2^15");
            g.relation_names_.push_back(name);
            if (!in_train) ++g.unseen_in_train_;
        }
        return it->second;
    };

    auto convert = [&](const std::vector<StringTriple>& src, std::vector<Triple>& dst) {
        std::unordered_set<std::uint64_t> seen;
        seen.reserve(src.size() * 2);
        for (const StringTriple& s : src) {
            Triple t{entity_id(s.subject), relation_id(s.relation), entity_id(s.object)};
            if (!seen.insert(g.key(t)).second) {
                ++g.duplicates_dropped_;
                continue;
            }
            dst.push_back(t);
        }
    };

    convert(train, g.train);
    in_train = false;
    convert(valid, g.valid);
    convert(test, g.test);

    for (const std::string& name : g.relation_names_)
        if (g.relation_ids_.count(name + "_inv"))
            throw std::invalid_argument(
                "relation name collision: '" + name + "_inv' already exists");

    const std::int32_t nr = g.num_relations();
    if (augment) {
        std::vector<Triple> augmented;
        augmented.reserve(g.train.size() * 2);
        for (const Triple& t : g.train) {
            augmented.push_back(t);
            augmented.push_back(inverse_triple(t, nr));
        }
        g.train = std::move(augmented);
    }

    auto index = [&](const std::vector<Triple>& split) {
        for (const Triple& t : split) {
            g.filter_.insert(g.key(t));
            g.filter_.insert(g.key(inverse_triple(t, nr)));
        }
    };
    index(g.train);
    index(g.valid);
    index(g.test);
    return g;
}

}  // namespace bcp
