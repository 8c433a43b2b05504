#include "cpe/errors.hpp"

namespace cpe {

std::string to_string(ProtocolErrorKind kind) {
  switch (kind) {
    case ProtocolErrorKind::MissingTag: return "missing_tag";
    case ProtocolErrorKind::BadNumber: return "bad_number";
    case ProtocolErrorKind::OutOfRange: return "out_of_range";
    case ProtocolErrorKind::Ambiguous: return "ambiguous";
    case ProtocolErrorKind::EmptyChoices: return "empty_choices";
  }
  return "unknown";
}

std::string to_string(TransportKind kind) {
  switch (kind) {
    case TransportKind::RateLimited: return "rate_limited";
    case TransportKind::ServerError: return "server_error";
    case TransportKind::ClientError: return "client_error";
    case TransportKind::Timeout: return "timeout";
  }
  return "unknown";
}

}  // namespace cpe
