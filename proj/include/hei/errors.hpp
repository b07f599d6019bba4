#pragma once

#include <stdexcept>
#include <string>

namespace hei {

// Root of every error this library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParameterError : public Error { using Error::Error; };
class CapacityError : public Error { using Error::Error; };
class IncompatibleError : public Error { using Error::Error; };
class LevelError : public Error { using Error::Error; };
class KeyError : public Error { using Error::Error; };
class FormatError : public Error { using Error::Error; };
class GeometryError : public Error { using Error::Error; };
class ShapeError : public Error { using Error::Error; };
class TrainingError : public Error { using Error::Error; };
class ProtocolError : public Error { using Error::Error; };
// Socket send or receive exceeded its I/O timeout.
class TimeoutError : public ProtocolError { using ProtocolError::ProtocolError; };
// An ERROR frame received from the peer; what() is the peer's message.
class RemoteError : public ProtocolError { using ProtocolError::ProtocolError; };

// Modulus chain exhausted. Carries the pipeline stage that ran out of levels.
class DepthError : public Error {
 public:
  DepthError(std::string stage, const std::string& what)
      : Error(stage.empty() ? what : "stage '" + stage + "': " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

}  // namespace hei
