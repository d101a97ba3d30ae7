#include "wingen/director.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <map>
#include <regex>
#include <sstream>

#include "httplib.h"
#include "json.hpp"

namespace wingen {

AudioSummary summarize_audio(const AudioTrack& audio, double fps) {
    const auto env = energy_envelope(audio, fps);
    AudioSummary out;
    if (env.empty()) return out;
    double mean = 0;
    for (double e : env) mean += e;
    mean /= static_cast<double>(env.size());
    double var = 0;
    for (double e : env) var += (e - mean) * (e - mean);
    const double cv = mean > 0 ? std::sqrt(var / static_cast<double>(env.size())) / mean : 0.0;
    if (mean < 0.02)
        out.emotion = "neutral";
    else if (mean >= 0.2)
        out.emotion = cv >= 0.5 ? "joyful" : "intense";
    else
        out.emotion = "calm";

    std::size_t onsets = 0;
    for (std::size_t i = 1; i < env.size(); ++i)
        if (env[i - 1] < 0.5 * mean && env[i] >= 0.5 * mean) ++onsets;
    const double per_second = onsets * fps / static_cast<double>(env.size());
    out.rate = per_second >= 3.0 ? "fast" : per_second >= 1.5 ? "moderate" : "slow";
    return out;
}

std::string describe_reference(const DenseArray& image, const Box* subject) {
    if (image.rank() != 3 || image.dim(0) != 3) throw ShapeError("reference image must be [3,H,W]");
    const int H = static_cast<int>(image.dim(1)), W = static_cast<int>(image.dim(2));
    Box b = subject && !subject->empty() ? *subject : Box{0, 0, H, W};
    b = Box{std::max(b.y0, 0), std::max(b.x0, 0), std::min(b.y1, H), std::min(b.x1, W)};
    double whole = 0, rgb[3] = {0, 0, 0};
    double n = 0;
    for (std::size_t c = 0; c < 3; ++c)
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const double v = image[(c * H + y) * W + x];
                whole += v;
                if (y >= b.y0 && y < b.y1 && x >= b.x0 && x < b.x1) rgb[c] += v;
            }
    n = b.empty() ? 1.0 : static_cast<double>((b.y1 - b.y0) * (b.x1 - b.x0));
    whole /= 3.0 * H * W;
    static const char* colour[3] = {"red", "green", "blue"};
    const int dom = static_cast<int>(std::max_element(rgb, rgb + 3) - rgb);
    const double spread = (*std::max_element(rgb, rgb + 3) - *std::min_element(rgb, rgb + 3)) / n;
    std::string tone = whole < 0.3 ? "dim" : whole > 0.65 ? "bright" : "evenly lit";
    std::string hue = spread < 0.05 ? "neutral-toned" : std::string(colour[dom]) + "-toned";
    return "a single speaker, " + hue + " subject in a " + tone + " frame";
}

const std::string& Storyline::section(const std::string& name) const {
    for (const auto& [k, v] : sections)
        if (k == name) return v;
    throw std::out_of_range("storyline has no section '" + name + "'");
}

std::string Storyline::to_text() const {
    std::string out;
    for (const auto& [k, v] : sections) {
        if (!out.empty()) out += "\n";
        out += k + ": " + v;
    }
    return out;
}

Storyline fallback_storyline(const DirectorRequest& req) {
    const std::string& u = req.user_prompt;
    const std::string mood = "a " + req.audio.emotion + " mood";
    const std::string pace = req.audio.rate + " speech";
    const std::string ref = req.reference_descriptor.empty() ? "the person in the reference image" : req.reference_descriptor;
    auto lead = [&](const std::string& rest) { return u.empty() ? rest : u + "; " + rest; };
    Storyline s;
    s.sections = {
        {"characters", lead("speaker as in the reference: " + ref)},
        {"background", lead("background kept from the reference image")},
        {"actions", lead("talks to the camera with " + pace + ", lips following the audio")},
        {"emotional shifts", lead("voice carries " + mood + ", face follows it; reference look: " + ref)},
        {"visual style", lead("matches the reference: " + ref)},
        {"camera plan", lead("steady medium close-up, " + (req.audio.rate == "fast" ? std::string("slight push-in") : "static"))},
    };
    return s;
}

std::optional<Storyline> parse_storyline(const std::string& text) {
    std::map<std::string, std::string> found;
    std::istringstream in(text);
    std::string line, current;
    while (std::getline(in, line)) {
        const auto colon = line.find(':');
        if (colon != std::string::npos) {
            std::string head = line.substr(0, colon);
            head.erase(0, head.find_first_not_of(" \t*#-"));
            head.erase(head.find_last_not_of(" \t*") + 1);
            std::transform(head.begin(), head.end(), head.begin(), [](unsigned char c) { return std::tolower(c); });
            const auto& names = storyline_sections();
            if (std::find(names.begin(), names.end(), head) != names.end()) {
                current = head;
                std::string body = line.substr(colon + 1);
                body.erase(0, body.find_first_not_of(" \t"));
                found[current] = body;
                continue;
            }
        }
        if (!current.empty() && !line.empty()) found[current] += (found[current].empty() ? "" : " ") + line;
    }
    Storyline s;
    for (const auto& name : storyline_sections()) {
        auto it = found.find(name);
        if (it == found.end() || it->second.empty()) return std::nullopt;
        s.sections.emplace_back(name, it->second);
    }
    return s;
}

namespace {

// Original few-shot example; fixed so replies are stable.
const char* k_system =
    "You turn a talking-video request into a storyline. Priority: the user's wording first, then the audio "
    "cues, then the reference image. Answer with exactly six lines: Characters, Background, Actions, "
    "Emotional shifts, Visual style, Camera plan, each as '<name>: <text>'.";
const char* k_example_user =
    "user prompt: a teacher explains fractions\naudio: emotion=calm rate=moderate\nreference: a single speaker, "
    "blue-toned subject in a bright frame";
const char* k_example_reply =
    "Characters: a teacher explaining fractions, blue-toned clothing\nBackground: bright classroom wall\n"
    "Actions: a teacher explains fractions, gestures at moderate pace\nEmotional shifts: patient and calm "
    "throughout\nVisual style: clean, bright, natural colour\nCamera plan: static medium shot";

}  // namespace

std::string director_request_body(const DirectorRequest& req, const std::string& model) {
    const std::string user = "user prompt: " + req.user_prompt + "\naudio: emotion=" + req.audio.emotion +
                             " rate=" + req.audio.rate + "\nreference: " + req.reference_descriptor;
    nlohmann::json body{{"model", model},
                        {"temperature", 0},
                        {"template", req.template_id},
                        {"messages",
                         {{{"role", "system"}, {"content", k_system}},
                          {{"role", "user"}, {"content", k_example_user}},
                          {{"role", "assistant"}, {"content", k_example_reply}},
                          {{"role", "user"}, {"content", user}}}}};
    return body.dump();
}

Storyline rewrite(const DirectorRequest& req, const std::optional<EndpointConfig>& endpoint) {
    if (!endpoint || endpoint->url.empty()) return fallback_storyline(req);
    auto downgrade = [&](const std::string& why) {
        std::cerr << "warning: director endpoint unusable (" << why << "), using the local template\n";
        Storyline s = fallback_storyline(req);
        s.downgraded = true;
        return s;
    };
    static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(endpoint->url, m, url_re)) return downgrade("bad url " + endpoint->url);
    const std::string path = m[2].matched ? m[2].str() : "/";
    std::string reply;
    try {
        httplib::Client cli(m[1].str());
        const auto secs = endpoint->timeout_ms / 1000, usecs = (endpoint->timeout_ms % 1000) * 1000;
        cli.set_connection_timeout(secs, usecs);
        cli.set_read_timeout(secs, usecs);
        cli.set_write_timeout(secs, usecs);
        httplib::Headers headers;
        if (const char* tok = std::getenv(endpoint->token_env.c_str()); tok && *tok)
            headers.emplace("Authorization", std::string("Bearer ") + tok);
        auto res = cli.Post(path, headers, director_request_body(req, endpoint->model), "application/json");
        if (!res) return downgrade(httplib::to_string(res.error()));
        if (res->status != 200) return downgrade("HTTP " + std::to_string(res->status));
        auto j = nlohmann::json::parse(res->body);
        reply = j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const std::exception& e) {
        return downgrade(e.what());
    }
    if (auto s = parse_storyline(reply)) {
        s->from_endpoint = true;
        return *s;
    }
    std::cerr << "warning: director reply has no recognizable sections, kept as one section\n";
    Storyline s;
    s.sections = {{"storyline", reply}};
    s.from_endpoint = true;
    return s;
}

}  // namespace wingen
