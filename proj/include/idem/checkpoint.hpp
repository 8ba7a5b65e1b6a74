#pragma once

#include <string>

#include "idem/qnet.hpp"

namespace idem {

struct Checkpoint {
    QNetwork net;
    AdamState adam;
};

// Text format, one value per token, doubles printed with 17 significant
// digits so a round trip is bit-exact. Layout:
//   idemq-checkpoint-v1
//   <hidden> <n_states> <n_actions>
//   w1 ... b1 ... w2 ... b2 ...        (row-major)
//   <t> <beta1> <beta2> <epsilon>
//   m_w1 ... v_w1 ... m_b1 ... v_b1 ... m_w2 ... v_w2 ... m_b2 ... v_b2 ...
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

} // namespace idem
