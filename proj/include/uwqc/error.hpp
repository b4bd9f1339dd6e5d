#pragma once

#include <stdexcept>
#include <string>

namespace uwqc {

enum class Errc {
  invalid_argument,
  grid_mismatch,
  beam_too_large,
  aliasing,
  zero_power,
  insufficient_sampling,
  no_valid_lenslets,
  rank_deficient,
  resolution,
  validation,
  io,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

inline void require(bool ok, Errc code, const std::string& what) {
  if (!ok) throw Error(code, what);
}

}  // namespace uwqc
