// hppnet CLI: transcribe | train | eval | synth | inspect.
#include "hppnet/train.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <iostream>
#include <map>

using namespace hppnet;
namespace fs = std::filesystem;

namespace {

// Segmented inference: 20 s windows with 1 s overlap. A note from the next
// segment whose onset falls in the first half of the overlap is the earlier
// segment's note and is dropped as a duplicate.
std::vector<NoteEvent> transcribe_clip(HppNet<float>& model, const AudioClip& clip,
                                       double onset_thresh, double frame_thresh) {
    const CqtTransform transform;
    const int hop = transform.config().hop;
    const int64_t seg_frames = 1000;    // 20 s
    const int64_t overlap_frames = 50;  // 1 s
    const int64_t total_frames = int64_t(clip.samples.size()) / hop;
    std::vector<NoteEvent> notes;
    for (int64_t start = 0; start == 0 || start + overlap_frames < total_frames;
         start += seg_frames - overlap_frames) {
        const int64_t end = std::min(total_frames, start + seg_frames);
        if (end <= start) break;
        AudioClip seg;
        seg.sample_rate = clip.sample_rate;
        seg.samples.assign(clip.samples.begin() + start * hop,
                           clip.samples.begin() + std::min<int64_t>(clip.samples.size(), end * hop));
        auto spec = transform.apply(seg);
        std::vector<float> input(spec.values.begin(), spec.values.end());
        auto x = Tensor<float>::from({1, 1, spec.frames, spec.n_bins}, std::move(input));
        auto heads = model.forward(x);
        auto post = to_posteriorgram(heads, 0);
        const double t0 = double(start) * 0.02;
        const double cutoff = start == 0 ? -1.0 : t0 + 0.02 * double(overlap_frames) / 2.0;
        for (auto n : decode(post, onset_thresh, frame_thresh)) {
            n.onset_time += t0;
            n.offset_time += t0;
            if (n.onset_time >= cutoff) notes.push_back(n);
        }
        if (end == total_frames) break;
    }
    std::sort(notes.begin(), notes.end(), [](const NoteEvent& a, const NoteEvent& b) {
        return a.onset_time < b.onset_time || (a.onset_time == b.onset_time && a.pitch < b.pitch);
    });
    return notes;
}

HppNet<float> load_model(const std::string& ckpt_path) {
    ModelConfig mcfg = ModelConfig::load(ckpt_path + ".cfg");
    HppNet<float> model(mcfg, 0);
    auto params = model.parameters();
    load_checkpoint(params, ckpt_path);
    return model;
}

std::map<std::string, std::string> read_kv_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read config: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("bad config line: " + line);
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

int cmd_transcribe(const std::string& model_path, const std::string& in_path,
                   const std::string& out_path, double onset_thresh, double frame_thresh) {
    auto model = load_model(model_path);
    auto clip = resample(read_wav(in_path));
    auto notes = transcribe_clip(model, clip, onset_thresh, frame_thresh);
    write_midi(notes, out_path);
    std::cout << "notes=" << notes.size() << "\n";
    return 0;
}

int cmd_eval_midi(const std::string& ref_path, const std::string& est_path) {
    auto ref = read_midi(ref_path);
    auto est = read_midi(est_path);
    // frame score over rolls spanning both files
    double last = 0;
    for (const auto& n : ref) last = std::max(last, n.offset_time);
    for (const auto& n : est) last = std::max(last, n.offset_time);
    const int64_t frames = std::max<int64_t>(1, int64_t(std::ceil(last / 0.02)) + 2);
    auto s_note = note_score(ref, est);
    auto s_off = note_score(ref, est, 0.05, true);
    auto s_frame = frame_score(make_targets(ref, frames).f, make_targets(est, frames).f);
    std::cout << scores_json(s_note, s_off, s_frame) << "\n";
    return 0;
}

int cmd_eval_model(const std::string& model_path, const std::string& manifest_path,
                   const std::string& split) {
    auto model = load_model(model_path);
    const auto entries = read_manifest(manifest_path);
    const fs::path base = fs::path(manifest_path).parent_path();
    std::vector<NoteEvent> all_ref, all_est;
    int64_t tp = 0, fp = 0, fn = 0;
    double mean_note = 0, mean_off = 0;
    int count = 0;
    for (const auto& e : entries) {
        if (!split.empty() && e.split != split) continue;
        auto resolve = [&](const std::string& p) {
            return fs::path(p).is_absolute() ? p : (base / p).string();
        };
        auto sample = load_pair(resolve(e.path_audio), resolve(e.path_midi));
        auto est = transcribe_clip(model, sample.audio, 0.4, 0.4);
        mean_note += note_score(sample.notes, est).f1;
        mean_off += note_score(sample.notes, est, 0.05, true).f1;
        auto est_targets = make_targets(est, sample.targets.frames);
        for (size_t i = 0; i < sample.targets.f.size(); ++i) {
            tp += sample.targets.f[i] && est_targets.f[i];
            fp += !sample.targets.f[i] && est_targets.f[i];
            fn += sample.targets.f[i] && !est_targets.f[i];
        }
        ++count;
    }
    if (count == 0) throw FormatError("manifest has no entries for split '" + split + "'");
    Score frame;
    frame.precision = tp + fp ? double(tp) / double(tp + fp) : (tp + fn ? 0.0 : 1.0);
    frame.recall = tp + fn ? double(tp) / double(tp + fn) : (tp + fp ? 0.0 : 1.0);
    frame.f1 = f_measure(frame.precision, frame.recall);
    Score note{0, 0, mean_note / count}, off{0, 0, mean_off / count};
    std::cout << scores_json(note, off, frame) << "\n";
    return 0;
}

int cmd_synth(const std::string& out_dir, int clips, uint64_t seed, int notes_per_clip,
              double seconds) {
    fs::create_directories(out_dir);
    auto dataset = make_dataset(clips, notes_per_clip, seed, seconds);
    std::vector<ManifestEntry> manifest;
    for (int i = 0; i < clips; ++i) {
        char name[64];
        std::snprintf(name, sizeof name, "clip_%04d", i);
        const std::string wav = std::string(name) + ".wav";
        const std::string mid = std::string(name) + ".mid";
        write_wav(dataset[i].audio, out_dir + "/" + wav);
        write_midi(dataset[i].notes, out_dir + "/" + mid);
        manifest.push_back({wav, mid, i % 5 == 4 ? "validation" : "train"});
    }
    write_manifest(manifest, out_dir + "/manifest.csv");
    std::cout << "clips=" << clips << " dir=" << out_dir << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& out_dir) {
    auto kv = read_kv_config(config_path);
    TrainConfig cfg;
    ModelConfig mcfg;
    std::string manifest_path;
    int synth_clips = 0, synth_notes = 24;
    double synth_seconds = 10.0;
    for (const auto& [k, v] : kv) {
        if (k == "batch_size") cfg.batch_size = std::stoi(v);
        else if (k == "learning_rate") cfg.learning_rate = std::stod(v);
        else if (k == "max_steps") cfg.max_steps = std::stoll(v);
        else if (k == "eval_every") cfg.eval_every = std::stoll(v);
        else if (k == "patience") cfg.patience = std::stoi(v);
        else if (k == "seed") cfg.seed = std::stoull(v);
        else if (k == "variant") cfg.variant = variant_from_name(v);
        else if (k == "clip_norm") cfg.clip_norm = std::stod(v);
        else if (k == "onset_thresh") cfg.onset_thresh = std::stod(v);
        else if (k == "frame_thresh") cfg.frame_thresh = std::stod(v);
        else if (k == "stop_note_f1") cfg.stop_note_f1 = std::stod(v);
        else if (k == "stop_frame_f1") cfg.stop_frame_f1 = std::stod(v);
        else if (k == "manifest") manifest_path = v;
        else if (k == "synth_clips") synth_clips = std::stoi(v);
        else if (k == "synth_notes_per_clip") synth_notes = std::stoi(v);
        else if (k == "synth_seconds") synth_seconds = std::stod(v);
        else if (k == "channels") mcfg.channels = std::stoi(v);
        else if (k == "lstm_units") mcfg.lstm_units = std::stoi(v);
        else if (k == "conv_stack_filters") mcfg.conv_stack_filters = std::stoi(v);
        else if (k == "block_count") mcfg.block_count = std::stoi(v);
        else throw FormatError("unknown config key: " + k);
    }
    if (kv.count("variant")) {
        auto base = ModelConfig::for_variant(cfg.variant);
        if (!kv.count("channels")) mcfg.channels = base.channels;
        if (!kv.count("lstm_units")) mcfg.lstm_units = base.lstm_units;
        mcfg.variant = cfg.variant;
    }
    mcfg.validate();

    std::vector<Sample> train, val;
    if (!manifest_path.empty()) {
        const fs::path base = fs::path(manifest_path).parent_path();
        for (const auto& e : read_manifest(manifest_path)) {
            auto resolve = [&](const std::string& p) {
                return fs::path(p).is_absolute() ? p : (base / p).string();
            };
            auto s = load_pair(resolve(e.path_audio), resolve(e.path_midi));
            (e.split == "validation" ? val : train).push_back(std::move(s));
        }
    } else {
        if (synth_clips <= 0) synth_clips = 8;
        auto data = make_dataset(synth_clips, synth_notes, cfg.seed + 1, synth_seconds);
        for (size_t i = 0; i < data.size(); ++i)
            (i % 5 == 4 ? val : train).push_back(std::move(data[i]));
    }
    if (val.empty() && !train.empty()) val.push_back(train.front());

    auto result = train_loop<float>(cfg, mcfg, train, val, out_dir, true);
    std::cout << "checkpoint=" << result.checkpoint_path << " best_note_f1=" << result.best_note_f1
              << " steps=" << result.steps_run << "\n";
    return 0;
}

int cmd_inspect(const std::string& model_path, const std::string& variant) {
    ModelConfig mcfg = !model_path.empty() ? ModelConfig::load(model_path + ".cfg")
                                           : ModelConfig::for_variant(variant_from_name(variant));
    HppNet<float> model(mcfg, 0);
    if (!model_path.empty()) {
        auto params = model.parameters();
        load_checkpoint(params, model_path);
    }
    int64_t total = 0;
    std::printf("%-36s %-18s %10s\n", "parameter", "shape", "count");
    for (auto& p : model.parameters()) {
        std::printf("%-36s %-18s %10lld\n", p.name.c_str(), shape_str(p.tensor.shape()).c_str(),
                    static_cast<long long>(p.tensor.size()));
        total += p.tensor.size();
    }
    std::printf("variant=%s total=%lld\n", variant_name(mcfg.variant).c_str(),
                static_cast<long long>(total));
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"HPPNet piano transcription"};
    app.require_subcommand(1);

    std::string model_path, in_path, out_path, ref_path, est_path, manifest_path, config_path;
    std::string out_dir = "run", split, variant = "base";
    double onset_thresh = 0.4, frame_thresh = 0.4, seconds = 10.0;
    int clips = 8, notes_per_clip = 24;
    uint64_t seed = 1;

    auto* transcribe = app.add_subcommand("transcribe", "WAV to MIDI");
    transcribe->add_option("--model", model_path, "checkpoint path")->required();
    transcribe->add_option("--in", in_path, "input wav")->required();
    transcribe->add_option("--out", out_path, "output midi")->required();
    transcribe->add_option("--onset-thresh", onset_thresh, "onset threshold");
    transcribe->add_option("--frame-thresh", frame_thresh, "frame threshold");

    auto* eval = app.add_subcommand("eval", "score transcriptions");
    eval->add_option("--ref", ref_path, "reference midi");
    eval->add_option("--est", est_path, "estimated midi");
    eval->add_option("--model", model_path, "checkpoint path");
    eval->add_option("--manifest", manifest_path, "dataset manifest csv");
    eval->add_option("--split", split, "manifest split to score");

    auto* synth = app.add_subcommand("synth", "generate synthetic wav+midi pairs");
    synth->add_option("--out-dir", out_dir, "output directory")->required();
    synth->add_option("--clips", clips, "number of clips");
    synth->add_option("--seed", seed, "random seed");
    synth->add_option("--notes-per-clip", notes_per_clip, "notes per clip");
    synth->add_option("--seconds", seconds, "clip length in seconds");

    auto* train = app.add_subcommand("train", "train a model");
    train->add_option("--config", config_path, "key=value config file")->required();
    train->add_option("--out-dir", out_dir, "run directory");

    auto* inspect = app.add_subcommand("inspect", "print the parameter table");
    inspect->add_option("--model", model_path, "checkpoint path");
    inspect->add_option("--variant", variant, "base|sp|tiny (when no checkpoint given)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*transcribe) return cmd_transcribe(model_path, in_path, out_path, onset_thresh, frame_thresh);
        if (*eval) {
            if (!ref_path.empty() && !est_path.empty()) return cmd_eval_midi(ref_path, est_path);
            if (!model_path.empty() && !manifest_path.empty())
                return cmd_eval_model(model_path, manifest_path, split);
            std::cerr << "error=usage detail=\"eval needs --ref/--est or --model/--manifest\"\n";
            return 2;
        }
        if (*synth) return cmd_synth(out_dir, clips, seed, notes_per_clip, seconds);
        if (*train) return cmd_train(config_path, out_dir);
        if (*inspect) return cmd_inspect(model_path, variant);
    } catch (const std::exception& e) {
        std::cerr << "error=" << typeid(e).name() << " detail=\"" << e.what() << "\"\n";
        return 1;
    }
    return 2;
}
