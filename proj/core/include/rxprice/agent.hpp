#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace rxprice {

enum class Intent {
  kRunOpt,
  kCfPriceBound,
  kShowBasePolicy,
  kKpiRevenue,
  kKpiConversion,
  kUnknown,
};

// Wire names: RUN_OPT, CF_PRICE_BOUND, SHOW_BASE_POLICY, KPI_REVENUE,
// KPI_CONVERSION and "Unknown".
std::string_view IntentName(Intent intent);
std::optional<Intent> ParseIntent(std::string_view name);

// Tool arguments. An empty optional is the literal Unknown.
struct SlotSet {
  std::optional<std::string> origin;
  std::optional<std::string> destination;
  std::optional<double> min_price;
  std::optional<double> max_price;
  std::optional<std::size_t> cardinality;

  bool AnyKnown() const;
  friend bool operator==(const SlotSet&, const SlotSet&) = default;
};

// Per-session memory of the last identified tool and its arguments.
struct AgentMemory {
  Intent function_call = Intent::kUnknown;
  SlotSet slots;
  std::chrono::system_clock::time_point updated_at{};
};

struct ExecuteTool {
  Intent tool = Intent::kUnknown;
  SlotSet slots;  // required slots known, optional ones defaulted
};

struct AskFollowUp {
  Intent pending = Intent::kUnknown;
  std::vector<std::string> missing;
  std::string question;
};

struct DialogReply {
  std::string text;
};

using AgentDecision = std::variant<ExecuteTool, AskFollowUp, DialogReply>;

std::string_view DecisionKind(const AgentDecision& decision);

// ---------------------------------------------------------------------------
// Completion backend

struct CompletionRequest {
  std::string prompt;
  double temperature = 0.0;
  int max_tokens = 128;
};

// Text-in/text-out completion. Implementations throw Error(kClientTimeout)
// when the backend cannot be reached in time.
class CompletionClient {
 public:
  virtual ~CompletionClient() = default;
  virtual std::string Complete(const CompletionRequest& request) = 0;
};

// POST {prompt, temperature, max_tokens} -> {text} over HTTP.
class HttpCompletionClient : public CompletionClient {
 public:
  HttpCompletionClient(std::string endpoint, std::chrono::milliseconds timeout);
  std::string Complete(const CompletionRequest& request) override;

 private:
  std::string base_;
  std::string path_;
  std::chrono::milliseconds timeout_;
};

// Prompt assets; `{utterance}` is replaced by the user text.
struct PromptTemplates {
  std::string dialog;
  std::string intent;
  std::string slots;
  std::string version;

  static const PromptTemplates& Bundled();
};

std::string RenderPrompt(std::string_view templ, std::string_view utterance);

// ---------------------------------------------------------------------------
// Parsing and dispatch

struct IntentResult {
  Intent intent = Intent::kUnknown;
  bool degraded = false;
};

// Keyword rules documented in README; used offline and as fallback.
Intent ClassifyIntentFallback(std::string_view utterance);

IntentResult ClassifyIntent(std::string_view utterance, CompletionClient* client);

// Airport code for a city name or code, if it is in the bundled table.
std::optional<std::string> LookupAirport(std::string_view name);

// Deterministic slot filler. Produces the same line grammar a completion
// model is prompted to emit.
std::string FallbackSlotCompletion(std::string_view utterance, Intent intent);

struct ParsedSlots {
  std::optional<Intent> function_call;
  SlotSet slots;
};

// Parses "key: value" lines (function_call, origin-destination, price_bound,
// cardinality). Unparseable values become Unknown. Throws
// Error(kMalformedCompletion) when no recognised line is present.
ParsedSlots ParseSlotCompletion(std::string_view text);

// Renders slots in the completion line grammar; only known fields are
// printed, as in the few-shot examples.
std::string FormatSlotCompletion(Intent intent, const SlotSet& slots);

struct SlotResult {
  SlotSet slots;
  bool degraded = false;
};

SlotResult FillSlots(std::string_view utterance, Intent intent, CompletionClient* client);

// Known incoming values overwrite; Unknown ones keep what is stored.
AgentMemory MergeMemory(const AgentMemory& memory, Intent intent, const SlotSet& slots,
                        std::chrono::system_clock::time_point now = std::chrono::system_clock::now());

// Tool to run for this turn: the classified intent, or, when the utterance
// only supplies arguments, the tool stored in memory.
Intent EffectiveIntent(const AgentMemory& memory, Intent intent, const SlotSet& slots);

inline constexpr std::string_view kOriginDestinationSlot = "origin-destination";

// Read-only on memory. Origin and destination are required for every tool;
// cardinality defaults to 1 and price bounds to the full grid.
AgentDecision Decide(const AgentMemory& memory, Intent intent, const SlotSet& slots);

// Canned reply for out-of-scope queries when no dialog model is configured.
std::string FallbackDialogReply();

struct TurnOutcome {
  Intent intent = Intent::kUnknown;
  SlotSet slots;
  AgentDecision decision;
  bool degraded = false;
};

// One user turn: classify, fill slots, merge into memory (the only write),
// decide. Dialog replies go through the completion client when present.
class Agent {
 public:
  explicit Agent(std::shared_ptr<CompletionClient> client = nullptr)
      : client_(std::move(client)) {}

  TurnOutcome Turn(AgentMemory& memory, std::string_view utterance) const;

 private:
  std::shared_ptr<CompletionClient> client_;
};

}  // namespace rxprice
