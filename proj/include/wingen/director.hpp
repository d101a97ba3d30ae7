#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wingen/audio.hpp"
#include "wingen/dense_array.hpp"
#include "wingen/synth.hpp"

namespace wingen {

// Tag thresholds on the per-frame RMS envelope.
//   emotion: mean < 0.02 -> "neutral"; mean >= 0.2 with cv >= 0.5 -> "joyful";
//            mean >= 0.2 -> "intense"; otherwise "calm"  (cv = std / mean)
//   rate:    upward crossings of half the mean per second >= 3 -> "fast", >= 1.5 -> "moderate", else "slow"
struct AudioSummary {
    std::string emotion = "neutral";
    std::string rate = "slow";
};

AudioSummary summarize_audio(const AudioTrack& audio, double fps);

/// Short text description of a reference image: overall tone and the dominant colour
/// inside `subject` (whole image when null).
std::string describe_reference(const DenseArray& image, const Box* subject = nullptr);

struct DirectorRequest {
    std::string user_prompt;
    AudioSummary audio;
    std::string reference_descriptor;
    std::string template_id = "talking-head-v1";
};

struct Storyline {
    std::vector<std::pair<std::string, std::string>> sections;
    bool from_endpoint = false;
    bool downgraded = false;  // endpoint configured but unusable

    const std::string& section(const std::string& name) const;
    std::string to_text() const;
};

inline const std::vector<std::string>& storyline_sections() {
    static const std::vector<std::string> names{"characters",   "background",   "actions",
                                                "emotional shifts", "visual style", "camera plan"};
    return names;
}

struct EndpointConfig {
    std::string url;  // http://host:port/path
    std::string model = "director";
    std::string token_env = "WINGEN_DIRECTOR_TOKEN";
    int timeout_ms = 10000;
};

/// Deterministic template: user text first, then audio tags, then the reference descriptor.
Storyline fallback_storyline(const DirectorRequest& req);

/// Splits "<Section>: text" lines into the six sections. Returns nullopt unless all six are present.
std::optional<Storyline> parse_storyline(const std::string& text);

/// JSON chat-completion body sent to the endpoint.
std::string director_request_body(const DirectorRequest& req, const std::string& model);

/// Endpoint rewrite when configured; any failure falls back with a warning on stderr.
Storyline rewrite(const DirectorRequest& req, const std::optional<EndpointConfig>& endpoint);

}  // namespace wingen
