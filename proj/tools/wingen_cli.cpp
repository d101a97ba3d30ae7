#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "probe.hpp"
#include "wingen/run_config.hpp"

using namespace wingen;
namespace fs = std::filesystem;

namespace {

struct ExitError : std::runtime_error {
    int code;
    ExitError(int c, const std::string& m) : std::runtime_error(m), code(c) {}
};

RunConfig load_config(const std::string& path) {
    if (path.empty()) return RunConfig::from_preset("desk");
    std::ifstream f(path);
    if (!f) throw ExitError(2, "cannot read config " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(f);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigKeyError("", std::string("config is not valid JSON: ") + e.what());
    }
    return parse_run_config(j);
}

void echo_config(const RunConfig& rc, const fs::path& dir) {
    fs::create_directories(dir);
    nlohmann::json j = to_json(rc);
    j["model_digest"] = model_digest(rc);
    std::ofstream(dir / "config.json") << j.dump(2) << "\n";
}

struct Model {
    ModelParams params;
    LoraAdapter adapter;
};

Model load_model(const RunConfig& rc, const std::string& checkpoint) {
    Model m{init_model(rc.model, rc.seeds.init), {}};
    m.adapter = init_lora(rc.model, m.params, rc.seeds.adapter);
    if (checkpoint.empty()) return m;
    Checkpoint ck = load_checkpoint(checkpoint);
    if (ck.config_digest != model_digest(rc))
        throw ChecksumError("checkpoint digest " + std::to_string(ck.config_digest) + " does not match the config's " +
                            std::to_string(model_digest(rc)));
    restore_checkpoint(ck, m.params, &m.adapter);
    return m;
}

DenseArray frame_image(const PixelVideo& v, std::size_t frame) {
    if (frame >= v.time()) throw std::invalid_argument("reference frame " + std::to_string(frame) + " out of range");
    return v.slice(frame, frame + 1).frames.reshaped({3, v.height(), v.width()});
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
    std::ofstream f(path);
    for (const auto& l : lines) f << l << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"wingen: audio-driven talking video toolkit"};
    app.require_subcommand(1);
    std::string config_path, out;
    app.add_option("--config", config_path, "JSON run config")->check(CLI::ExistingFile);
    app.add_option("--out", out, "artifact directory (overrides paths.out)");

    auto* synth = app.add_subcommand("synth", "write the standard fixture set");
    std::optional<std::size_t> count, frames;
    std::optional<std::uint64_t> fixture_seed;
    synth->add_option("--count", count);
    synth->add_option("--frames", frames);
    synth->add_option("--seed", fixture_seed);

    auto* train = app.add_subcommand("train", "train on the standard fixture set");
    std::optional<std::size_t> train_steps, batch;
    std::optional<std::uint64_t> batch_seed;
    train->add_option("--steps", train_steps);
    train->add_option("--batch", batch);
    train->add_option("--seed", batch_seed, "batch sampling seed");

    std::string checkpoint, audio_path, prompt;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> sample_steps;
    std::optional<double> guidance;

    auto* gen = app.add_subcommand("generate", "sliding-window generation from a reference frame and audio");
    std::string reference_path;
    std::size_t reference_frame = 0;
    std::optional<std::size_t> windows;
    bool storyline = false;
    std::string director_url;
    gen->add_option("--checkpoint", checkpoint)->check(CLI::ExistingFile);
    gen->add_option("--reference", reference_path, "WGV1 video holding the reference frame")->required()->check(CLI::ExistingFile);
    gen->add_option("--reference-frame", reference_frame);
    gen->add_option("--audio", audio_path, "WGA1 audio")->required()->check(CLI::ExistingFile);
    gen->add_option("--prompt", prompt);
    gen->add_option("--seed", seed, "window plan seed");
    gen->add_option("--windows", windows);
    gen->add_option("--steps", sample_steps);
    gen->add_option("--guidance", guidance);
    gen->add_flag("--storyline", storyline, "rewrite the prompt into a storyline first");
    gen->add_option("--director-url", director_url);

    auto* dubc = app.add_subcommand("dub", "re-generate a video for new audio");
    std::string input_path;
    std::optional<double> alpha;
    dubc->add_option("--checkpoint", checkpoint)->check(CLI::ExistingFile);
    dubc->add_option("--input", input_path, "WGV1 video")->required()->check(CLI::ExistingFile);
    dubc->add_option("--audio", audio_path, "WGA1 audio")->required()->check(CLI::ExistingFile);
    dubc->add_option("--prompt", prompt);
    dubc->add_option("--alpha", alpha);
    dubc->add_option("--seed", seed);
    dubc->add_option("--steps", sample_steps);
    dubc->add_option("--guidance", guidance);

    auto* probe = app.add_subcommand("probe", "run the invariant suites");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (probe->parsed()) return run_probe(std::cout) ? 0 : 1;

        RunConfig rc = load_config(config_path);
        if (!out.empty()) rc.out = out;
        if (count) rc.fixtures.count = *count;
        if (frames) rc.fixtures.frames = *frames;
        if (fixture_seed) rc.fixtures.seed = *fixture_seed;
        if (train_steps) rc.train.steps = *train_steps;
        if (batch) rc.train.batch = *batch;
        if (batch_seed) rc.seeds.batches = *batch_seed;
        if (sample_steps) rc.generation.steps = *sample_steps;
        if (guidance) rc.generation.guidance.scale = *guidance;
        if (windows) rc.window.windows = *windows;
        if (!director_url.empty()) rc.director.url = director_url;
        if (gen->parsed() && seed) rc.window.seed = *seed;
        if (dubc->parsed() && seed) rc.dubbing.seed = *seed;
        if (alpha) rc.dubbing.alpha = *alpha;
        validate(rc);
        const fs::path dir = rc.out;
        echo_config(rc, dir);

        if (synth->parsed()) {
            const auto pool = standard_fixtures(rc.fixtures);
            for (std::size_t i = 0; i < pool.size(); ++i) {
                const std::string stem = (dir / ("fixture_" + std::to_string(i))).string();
                write_video(stem + ".wgv", pool[i].video);
                write_audio(stem + ".wga", pool[i].audio);
                write_fixture_records(stem + ".jsonl", pool[i]);
            }
            std::cout << "wrote " << pool.size() << " fixtures to " << dir << "\n";
            return 0;
        }

        if (train->parsed()) {
            Model m = load_model(rc, "");
            std::ofstream metrics(dir / "metrics.jsonl");
            auto outcome = train_standard(rc, m.params, m.adapter, [&](const StepMetrics& s) {
                metrics << s.to_json() << "\n";
                metrics.flush();
            });
            metrics << nlohmann::json{{"event", "summary"},
                                      {"initial_eval_loss", outcome.initial_eval_loss},
                                      {"final_eval_loss", outcome.final_eval_loss},
                                      {"ratio", outcome.final_eval_loss / outcome.initial_eval_loss}}
                           .dump()
                    << "\n";
            save_checkpoint((dir / "checkpoint.wgn").string(), make_checkpoint(m.params, &m.adapter, model_digest(rc)));
            std::cout << "eval loss " << outcome.initial_eval_loss << " -> " << outcome.final_eval_loss << "\n";
            return 0;
        }

        const LatentCodec codec(rc.codec);
        Model m = load_model(rc, checkpoint);
        const Generator g{&m.params, &m.adapter, &rc.model, &codec};
        const AudioTrack audio = read_audio(audio_path);

        if (gen->parsed()) {
            const PixelVideo ref_video = read_video(reference_path);
            const DenseArray reference = frame_image(ref_video, reference_frame);
            std::string text = prompt;
            if (storyline) {
                DirectorRequest req;
                req.user_prompt = prompt;
                req.audio = summarize_audio(audio, rc.window.fps);
                req.reference_descriptor = describe_reference(reference);
                std::optional<EndpointConfig> ep;
                if (!rc.director.url.empty()) ep = rc.director;
                const Storyline s = rewrite(req, ep);
                text = s.to_text();
                std::ofstream(dir / "storyline.txt") << text << "\n";
            }
            auto res = generate_long(g, reference, audio, text, rc.window, rc.generation);
            write_video((dir / "video.wgv").string(), res.video);
            std::vector<std::string> lines;
            for (const auto& d : res.diagnostics) lines.push_back(d.to_json());
            write_lines(dir / "diagnostics.jsonl", lines);
            std::cout << "wrote " << res.video.time() << " frames to " << (dir / "video.wgv") << "\n";
            return 0;
        }

        if (dubc->parsed()) {
            const PixelVideo input = read_video(input_path);
            auto res = dub(g, input, audio, prompt, rc.dubbing, rc.generation);
            write_video((dir / "dubbed.wgv").string(), res.video);
            std::vector<std::string> lines;
            for (std::size_t k = 0; k < res.steps.size(); ++k)
                lines.push_back(nlohmann::json{{"segment", k}, {"reference_frame", res.reference_frames[k]}, {"steps", res.steps[k]}}.dump());
            write_lines(dir / "diagnostics.jsonl", lines);
            std::cout << "wrote " << res.video.time() << " frames to " << (dir / "dubbed.wgv") << "\n";
            return 0;
        }
    } catch (const ConfigKeyError& e) {
        std::cerr << "config error" << (e.key.empty() ? "" : " at '" + e.key + "'") << ": " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ChecksumError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return 3;
    } catch (const ExitError& e) {
        std::cerr << e.what() << "\n";
        return e.code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
