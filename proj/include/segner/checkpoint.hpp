#ifndef SEGNER_CHECKPOINT_HPP
#define SEGNER_CHECKPOINT_HPP

#include <stdexcept>
#include <string>
#include <string_view>

#include "segner/pipeline.hpp"

namespace segner {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// JSON document; see docs/formats.md. Doubles are written in shortest
/// round-trip form, so loading reproduces every parameter bit for bit.
std::string checkpoint_to_string(const Checkpoint& ckpt);
Checkpoint checkpoint_from_string(std::string_view text);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace segner

#endif  // SEGNER_CHECKPOINT_HPP
