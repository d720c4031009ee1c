#pragma once

#include <functional>
#include <string>
#include <vector>

namespace ibeval {

// One chat-completions message. Roles follow the wire protocol: "system",
// "user", "assistant".
struct ChatMessage {
  std::string role;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

// Minimal completion callable shared by promptfabric (live polishing) and
// modelclient, so the two modules do not depend on each other's types.
using CompleteFn =
    std::function<std::string(const std::vector<ChatMessage>&)>;

}  // namespace ibeval
