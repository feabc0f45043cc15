#pragma once

#include <cstdint>

namespace bcp {

// One fact (subject, relation, object) in integer id space. Relation ids in
// [0, N_r) are the original relations; ids in [N_r, 2*N_r) are their inverses.
struct Triple {
    std::int32_t subject = 0;
    std::int32_t relation = 0;
    std::int32_t object = 0;

    friend bool operator==(const Triple&, const Triple&) = default;
};

// The companion fact (object, relation+N_r, subject), or the original fact
// when applied to an already-inverted relation id.
inline Triple inverse_triple(const Triple& t, std::int32_t num_relations) {
    const std::int32_t rel = t.relation < num_relations
                                 ? t.relation + num_relations
                                 : t.relation - num_relations;
    return Triple{t.object, rel, t.subject};
}

}  // namespace bcp
