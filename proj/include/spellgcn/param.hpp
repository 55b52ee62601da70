#pragma once

#include <string>

#include "spellgcn/matrix.hpp"

namespace spellgcn {

// Named parameter tensor. `decay` marks tensors subject to weight decay;
// `freeze_pad_row` pins the PAD embedding row at zero across updates.
template <class Real>
struct ParamRef {
  std::string name;
  Matrix<Real>* tensor;
  bool decay = true;
  bool freeze_pad_row = false;
};

}  // namespace spellgcn
