#pragma once

#include "namegate/models.hpp"
#include "namegate/synthdata.hpp"

namespace testoracle {

// A matcher whose audio head reproduces the synthetic text map and whose
// text head is the identity, so a clean recording of word w embeds onto
// exactly the prompt vector of w.
inline std::unique_ptr<namegate::MatcherRecognizer> oracle_matcher(const namegate::SynthData& d) {
  using namespace namegate;
  const std::size_t fd = d.text_map.rows();
  const std::size_t td = d.text_map.cols();
  auto p = init_matcher<float>(fd, td, td, 0);
  p.audio_weight.value = d.text_map;
  Matrix eye(td, td);
  for (std::size_t i = 0; i < td; ++i) eye(i, i) = 1.0f;
  p.text_weight.value = eye;
  Matrix text(d.prompts.size(), td);
  for (std::size_t k = 0; k < d.prompts.size(); ++k)
    std::copy(d.prompts[k].second.values().begin(), d.prompts[k].second.values().end(), text.row(k).begin());
  return std::make_unique<MatcherRecognizer>(std::move(p), LabelSpace(d.vocabulary), PromptTemplate{},
                                             std::move(text), nlohmann::json{{"mode", "file_backed"}});
}

}  // namespace testoracle
