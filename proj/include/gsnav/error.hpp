#pragma once

#include <stdexcept>
#include <string>

namespace gsnav {

/// Failure categories surfaced through the library API.  The CLI maps these to
/// process exit codes; library users can switch on `code()`.
enum class ErrorCode {
  kIo,                  // unreadable/truncated/unwritable files
  kSchema,              // structurally valid file with wrong/missing fields
  kParse,               // malformed input (bad header bytes, bad numbers)
  kDomain,              // argument outside the documented domain
  kBlockedEndpoint,     // start or goal voxel occupied
  kDisconnected,        // no grid path between endpoints
  kUnsafeSeed,          // a seed segment fails the exact collision test
  kCorridorDisconnect,  // consecutive polytopes share no transition waypoint
  kQpFailure,           // trajectory QP did not reach a usable solution
  kNoConsensus,         // RANSAC found no acceptable inlier set
  kInternal,            // invariant violation (bug trap)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

/// Always-on invariant check (unlike assert(), survives NDEBUG builds).
inline void check(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kInternal, "invariant violated: " + what);
}

}  // namespace gsnav
