#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ktlab/seq/model.hpp"
#include "ktlab/train/teacher.hpp"

namespace ktlab::metrics {

struct DialogEntry {
  seq::TokenId token = 0;
  double proposer_prob = 0.0;  // probability under the side that proposed the token
  double reply_prob = 0.0;     // probability under the other side

  friend bool operator==(const DialogEntry&, const DialogEntry&) = default;
};

/// One target position seen both ways: the learner proposes and the teacher answers (KA),
/// and the teacher proposes and the learner answers (KD). Zero-probability proposals are
/// left out, so a view can be shorter than top_m.
struct DialogTrace {
  std::size_t position = 0;
  seq::TokenId reference = 0;
  std::vector<DialogEntry> ka_view;
  std::vector<DialogEntry> kd_view;

  std::string render(const seq::Vocab& target_vocab) const;
};

DialogTrace dialog_trace(const seq::ModelParams& learner, const train::TeacherEvaluator& teacher,
                         const seq::SentencePair& pair, std::size_t position, std::size_t top_m);

}  // namespace ktlab::metrics
