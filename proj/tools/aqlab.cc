// Copyright 2026 The aqlab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "aqlab/aq_decoder.h"
#include "aqlab/bench.h"
#include "aqlab/circuit.h"
#include "aqlab/dem.h"
#include "aqlab/matching.h"
#include "aqlab/metrics.h"
#include "aqlab/shot_io.h"
#include "aqlab/training.h"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace aqlab;

namespace {

constexpr const char *kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kUsage = 2, kValidation = 3, kRuntime = 4 };

class ValidationError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

void print_error(const char *kind, const std::string &message) {
    json j;
    j["error"] = kind;
    j["message"] = message;
    std::cerr << j.dump() << std::endl;
}

std::string read_file(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open " + path);
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << text)) {
        throw std::runtime_error("cannot write " + path.string());
    }
}

/// Experiment parameters shared by most commands.
struct Experiment {
    std::string code = "surface";
    int distance = 3;
    uint32_t cycles = 10;
    double p = 0.005;
    std::string basis = "z";
    std::string circuit_path;

    void add_flags(CLI::App *app, bool allow_file) {
        app->add_option("--code", code, "surface or colour")->capture_default_str();
        app->add_option("--distance", distance, "code distance")->capture_default_str();
        app->add_option("--cycles", cycles, "measurement cycles")->capture_default_str();
        app->add_option("--p", p, "SI1000 noise strength")->capture_default_str();
        app->add_option("--basis", basis, "memory basis (x or z)")->capture_default_str();
        if (allow_file) {
            app->add_option("--circuit", circuit_path, "read this circuit instead of generating one");
        }
    }

    CodeSpec spec() const {
        CodeSpec s{parse_code_kind(code), distance, parse_basis(basis)};
        s.validate();
        return s;
    }

    Circuit build() const {
        if (!circuit_path.empty()) {
            return parse_circuit(read_file(circuit_path));
        }
        if (cycles < 1) {
            throw ValidationError("--cycles must be at least 1");
        }
        NoiseParams noise{p};
        noise.validate();
        return build_memory_circuit(spec(), cycles, noise);
    }

    json to_json() const {
        json j;
        if (!circuit_path.empty()) {
            j["circuit"] = circuit_path;
            return j;
        }
        j["code"] = code;
        j["distance"] = distance;
        j["cycles"] = cycles;
        j["p"] = p;
        j["basis"] = basis;
        return j;
    }
};

/// Output directory holding exactly one manifest.json.
class RunDir {
   public:
    RunDir(std::string command, const std::string &dir)
        : command_(std::move(command)), dir_(dir), start_(std::chrono::steady_clock::now()) {
        if (dir.empty()) {
            throw ValidationError("--out-dir is required");
        }
        fs::create_directories(dir_);
    }

    fs::path output(const std::string &name) {
        outputs_.push_back(name);
        return dir_ / name;
    }
    void input(const std::string &path) {
        inputs_.push_back(path);
    }
    json config;
    json seeds = json::object();

    void finish() const {
        json m;
        m["command"] = command_;
        m["tool_version"] = kVersion;
        m["config"] = config;
        m["seeds"] = seeds;
        m["inputs"] = inputs_;
        m["outputs"] = outputs_;
        m["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        write_file(dir_ / "manifest.json", m.dump(2) + "\n");
    }

   private:
    std::string command_;
    fs::path dir_;
    std::chrono::steady_clock::time_point start_;
    std::vector<std::string> inputs_;
    std::vector<std::string> outputs_;
};

struct DecoderOptions {
    std::vector<std::string> models;
    size_t ml_weight_cap = 30;
    size_t ml_max_expansions = 2'000'000;
    unsigned threads = 1;
};

/// Predictions of one named decoder for every shot of a table (bit k = observable k).
std::vector<uint8_t> predict(const std::string &name, const Circuit &circuit, const ShotTable &shots,
                             const DecoderOptions &opt) {
    if (name == "aq") {
        if (opt.models.empty()) {
            throw ValidationError("decoder aq needs at least one --model");
        }
        if (!circuit.info()) {
            throw ValidationError("decoder aq needs a generated experiment, not --circuit");
        }
        std::vector<std::shared_ptr<const AqModel<float>>> models;
        for (const auto &m : opt.models) {
            models.push_back(load_model(m));
        }
        return AqDecoder(models, circuit.info()).predict_table(shots);
    }
    std::vector<uint8_t> pred;
    DetectorErrorModel dem = extract_dem(circuit);
    if (name == "mwpm") {
        evaluate_decoder(MwpmDecoder(to_matching_graph(dem)), shots, opt.threads, &pred);
    } else if (name == "ml") {
        evaluate_decoder(MlDecoder(dem, opt.ml_weight_cap, opt.ml_max_expansions), shots, opt.threads, &pred);
    } else {
        throw ValidationError("unknown decoder '" + name + "' (expected mwpm, ml or aq)");
    }
    return pred;
}

uint64_t count_errors(const ShotTable &shots, const std::vector<uint8_t> &pred) {
    uint64_t errors = 0;
    for (size_t s = 0; s < shots.num_shots(); s++) {
        uint8_t actual = 0;
        for (size_t k = 0; k < shots.num_observables() && k < 8; k++) {
            actual |= uint8_t(shots.observable(s, k)) << k;
        }
        errors += actual != pred[s];
    }
    return errors;
}

ShotTable load_shots_for(const std::string &path, const Circuit &circuit) {
    ShotTable t = read_shots_file(path);
    if (t.num_detectors() != circuit.num_detectors() || t.num_observables() != circuit.num_observables()) {
        throw ValidationError("shot file " + path + " has " + std::to_string(t.num_detectors()) + " detectors and " +
                              std::to_string(t.num_observables()) + " observables; the circuit has " +
                              std::to_string(circuit.num_detectors()) + " and " +
                              std::to_string(circuit.num_observables()));
    }
    return t;
}

ResultRecord make_record(const Experiment &e, const std::string &decoder, uint64_t errors, uint64_t shots) {
    ResultRecord r;
    r.code = e.code;
    r.distance = uint32_t(e.distance);
    r.p = e.p;
    r.decoder = decoder;
    r.stats = ler_stats(errors, shots, e.cycles);
    return r;
}

std::vector<std::string> split(const std::string &text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"aqlab: simulate, decode, train and benchmark quantum memory experiments"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    Experiment exp;
    std::string out_dir;
    std::optional<uint64_t> seed;
    unsigned threads = 1;
    DecoderOptions dopt;

    auto *gen = app.add_subcommand("gen-circuit", "write a noisy memory circuit");
    exp.add_flags(gen, false);
    gen->add_option("--out-dir", out_dir)->required();

    size_t num_shots = 1000;
    std::string format = "b8";
    auto *sample = app.add_subcommand("sample", "sample detection events and observable flips");
    exp.add_flags(sample, true);
    sample->add_option("--shots", num_shots)->capture_default_str();
    sample->add_option("--seed", seed)->required();
    sample->add_option("--format", format, "b8 or 01")->capture_default_str();
    sample->add_option("--threads", threads)->capture_default_str();
    sample->add_option("--out-dir", out_dir)->required();

    auto *dem_cmd = app.add_subcommand("dem", "extract the detector error model");
    exp.add_flags(dem_cmd, true);
    dem_cmd->add_option("--out-dir", out_dir)->required();

    std::string decoder_name = "mwpm", shots_path;
    auto add_decoder_flags = [&](CLI::App *c) {
        c->add_option("--model", dopt.models, "model checkpoint (repeat for an ensemble)");
        c->add_option("--ml-weight-cap", dopt.ml_weight_cap)->capture_default_str();
        c->add_option("--ml-max-expansions", dopt.ml_max_expansions)->capture_default_str();
        c->add_option("--threads", threads)->capture_default_str();
    };
    auto *decode = app.add_subcommand("decode", "decode a shot file");
    exp.add_flags(decode, true);
    decode->add_option("--decoder", decoder_name, "mwpm, ml or aq")->capture_default_str();
    decode->add_option("--shots", shots_path)->required();
    add_decoder_flags(decode);
    decode->add_option("--out-dir", out_dir)->required();

    std::string train_config, resume;
    std::optional<uint64_t> examples;
    std::optional<double> lr, mask;
    std::optional<size_t> batch, channels;
    bool no_aux = false;
    auto *train = app.add_subcommand("train", "train a neural decoder");
    train->add_option("--config", train_config, "training config JSON");
    train->add_option("--seed", seed)->required();
    train->add_option("--examples", examples);
    train->add_option("--lr", lr, "base learning rate");
    train->add_option("--batch", batch);
    train->add_option("--mask-fraction", mask);
    train->add_option("--channels", channels, "model width");
    train->add_flag("--no-aux", no_aux, "disable auxiliary heads");
    train->add_option("--resume", resume, "continue from a checkpoint");
    train->add_option("--out-dir", out_dir)->required();

    std::string decoders = "mwpm";
    auto *eval = app.add_subcommand("eval", "compare decoders on one shot file");
    exp.add_flags(eval, true);
    eval->add_option("--decoders", decoders, "comma separated list")->capture_default_str();
    eval->add_option("--shots", shots_path)->required();
    add_decoder_flags(eval);
    eval->add_option("--out-dir", out_dir)->required();

    double clock_period = 0;
    std::string mode = "virtual", blocks;
    auto *bench = app.add_subcommand("bench", "throughput and latency");
    exp.add_flags(bench, false);
    bench->add_option("--decoder", decoder_name)->capture_default_str();
    bench->add_option("--shots", num_shots)->capture_default_str();
    bench->add_option("--seed", seed)->required();
    bench->add_option("--clock-period", clock_period, "seconds per cycle; 0 measures throughput only");
    bench->add_option("--mode", mode, "virtual or wall")->capture_default_str();
    bench->add_option("--blocks", blocks, "comma separated block sizes to sweep (aq)");
    add_decoder_flags(bench);
    bench->add_option("--out-dir", out_dir)->required();

    std::vector<std::string> report_inputs;
    auto *report = app.add_subcommand("report", "tables from result JSON lines");
    report->add_option("--in", report_inputs)->required();
    report->add_option("--out-dir", out_dir)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        print_error("usage", e.what());
        return kUsage;
    }
    dopt.threads = threads;

    try {
        if (*gen) {
            RunDir run("gen-circuit", out_dir);
            run.config = exp.to_json();
            write_file(run.output("circuit.circ"), serialize_circuit(exp.build()));
            run.finish();
        } else if (*sample) {
            RunDir run("sample", out_dir);
            ShotFormat f = parse_shot_format(format);
            Circuit c = exp.build();
            SampleOptions opt;
            opt.threads = threads;
            ShotTable t = sample_table(c, num_shots, *seed, opt);
            write_shots_file(run.output(f == ShotFormat::B8 ? "shots.b8" : "shots.01").string(), t, f);
            run.config = exp.to_json();
            run.config["shots"] = num_shots;
            run.config["format"] = format;
            run.seeds["sample"] = *seed;
            run.finish();
        } else if (*dem_cmd) {
            RunDir run("dem", out_dir);
            run.config = exp.to_json();
            write_file(run.output("model.dem"), serialize_dem(extract_dem(exp.build())));
            run.finish();
        } else if (*decode) {
            RunDir run("decode", out_dir);
            Circuit c = exp.build();
            ShotTable t = load_shots_for(shots_path, c);
            run.input(shots_path);
            auto pred = predict(decoder_name, c, t, dopt);
            std::ostringstream p;
            write_predictions(p, pred, t.num_observables());
            write_file(run.output("predictions.01"), p.str());
            ResultRecord r = make_record(exp, decoder_name, count_errors(t, pred), t.num_shots());
            write_file(run.output("stats.json"), to_json(r) + "\n");
            run.config = exp.to_json();
            run.config["decoder"] = decoder_name;
            run.config["models"] = dopt.models;
            run.finish();
            std::cout << to_json(r) << std::endl;
        } else if (*train) {
            RunDir run("train", out_dir);
            TrainConfig tc = train_config.empty() ? TrainConfig{} : TrainConfig::from_json(read_file(train_config));
            tc.seed = *seed;
            if (examples) tc.total_examples = *examples;
            if (lr) tc.base_learning_rate = *lr;
            if (batch) tc.batch_size = *batch;
            if (mask) tc.mask_fraction = *mask;
            if (no_aux) tc.aux_heads = false;
            tc.validate();
            ModelConfig mc = ModelConfig::desk(tc.code);
            if (channels) mc.channels = *channels;
            mc.validate();
            AqModel<float> model(mc, tc.seed);
            Trainer trainer(model, tc);
            if (!resume.empty()) {
                run.input(resume);
                trainer.resume(resume);
            }
            std::ofstream log(run.output("train.jsonl"));
            trainer.run(&log, run.output("checkpoint.aqck").string());
            run.config = json::parse(tc.to_json());
            run.config["model"] = json::parse(mc.to_json());
            run.seeds["train"] = tc.seed;
            run.finish();
        } else if (*eval) {
            RunDir run("eval", out_dir);
            Circuit c = exp.build();
            ShotTable t = load_shots_for(shots_path, c);
            run.input(shots_path);
            std::vector<ResultRecord> rows;
            std::string lines;
            for (const auto &name : split(decoders)) {
                auto pred = predict(name, c, t, dopt);
                rows.push_back(make_record(exp, name, count_errors(t, pred), t.num_shots()));
                lines += to_json(rows.back()) + "\n";
            }
            write_file(run.output("comparison.jsonl"), lines);
            write_file(run.output("comparison.md"), results_markdown(rows));
            run.config = exp.to_json();
            run.config["decoders"] = split(decoders);
            run.config["models"] = dopt.models;
            run.finish();
            std::cout << results_markdown(rows);
        } else if (*bench) {
            RunDir run("bench", out_dir);
            Circuit c = exp.build();
            ShotTable t = sample_table(c, num_shots, *seed);
            std::unique_ptr<IncrementalDecoder> inc;
            std::shared_ptr<AqModel<float>> model;
            std::unique_ptr<Decoder> whole;
            if (decoder_name == "aq") {
                if (dopt.models.size() != 1) {
                    throw ValidationError("bench with aq needs exactly one --model");
                }
                model = load_model(dopt.models[0]);
                inc = std::make_unique<AqIncremental>(*model, c.info());
            } else if (decoder_name == "mwpm") {
                whole = std::make_unique<MwpmDecoder>(to_matching_graph(extract_dem(c)));
                inc = std::make_unique<WholeShotIncremental>(*whole);
            } else {
                throw ValidationError("bench supports decoders aq and mwpm");
            }
            TimingReport r = clock_period > 0
                                 ? measure_latency(*inc, t, exp.cycles, clock_period,
                                                   mode == "wall" ? ClockMode::Wall : ClockMode::Virtual)
                                 : measure_throughput(*inc, t, exp.cycles);
            write_file(run.output("timing.jsonl"), r.to_json_lines());
            write_file(run.output("summary.json"), r.to_json() + "\n");
            if (!blocks.empty()) {
                if (!model) {
                    throw ValidationError("--blocks needs the aq decoder");
                }
                std::vector<size_t> sizes;
                for (const auto &b : split(blocks)) {
                    sizes.push_back(std::stoul(b));
                }
                write_file(run.output("blocks.csv"), sweep_block_size(*model, c.info(), t, sizes).to_csv());
            }
            run.config = exp.to_json();
            run.config["decoder"] = decoder_name;
            run.config["shots"] = num_shots;
            run.config["clock_period"] = clock_period;
            run.config["mode"] = mode;
            run.seeds["sample"] = *seed;
            run.finish();
            std::cout << r.to_json() << std::endl;
        } else if (*report) {
            RunDir run("report", out_dir);
            std::vector<ResultRecord> rows;
            for (const auto &path : report_inputs) {
                run.input(path);
                std::istringstream in(read_file(path));
                std::string line;
                while (std::getline(in, line)) {
                    if (!line.empty()) {
                        rows.push_back(result_from_json(line));
                    }
                }
            }
            write_file(run.output("report.csv"), results_csv(rows));
            write_file(run.output("report.md"), results_markdown(rows));
            run.finish();
            std::cout << results_markdown(rows);
        }
    } catch (const ValidationError &e) {
        print_error("validation", e.what());
        return kValidation;
    } catch (const std::invalid_argument &e) {
        print_error("validation", e.what());
        return kValidation;
    } catch (const ParseError &e) {
        print_error("validation", e.what());
        return kValidation;
    } catch (const json::exception &e) {
        print_error("validation", e.what());
        return kValidation;
    } catch (const ShotFileError &e) {
        print_error("validation", e.what());
        return kValidation;
    } catch (const std::exception &e) {
        print_error("runtime", e.what());
        return kRuntime;
    }
    return kOk;
}
