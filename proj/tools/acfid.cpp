/*
Copyright 2026 The acfid Authors
Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
you may obtain a copy of the License at

                http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/


// acfid: arithmetic-coding fidelity pipeline.
//
//   generate -> split -> fit -> encode / decode / verify -> audit / budget
//            -> perturb -> scan -> gzip-compare -> report
//
// Exit codes: 0 ok, 1 domain failure (bad file, hash mismatch, failed check), 2 usage.

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "acfid/deflate.hpp"
#include "acfid/fidelity.hpp"
#include "acfid/manifest.hpp"

namespace fs = std::filesystem;
using namespace acfid;

namespace {

// Failed check that is not an exception from the library (closure mismatch).
class CheckFailed : public Error {
public:
    using Error::Error;
};

struct Common {
    std::uint64_t seed = 1;
    unsigned jobs = 1;
    std::string manifest;
};

struct Opts {
    std::string in, out, model, train, test, b1, b2, config, csv, out_dir;
    std::string mode = "conditional";
    std::string fractions = "0.5,0.5";
    std::string eps_grid = "log:1e-6:1e-1:23";
    std::string levels = "9,6,1";
    std::string model_uncond, model_cond;
    std::vector<std::string> files;
    std::size_t events = 0;
    int bins = 10;
    double p_max = 10.0;
    double eps = 0.0;
    std::size_t k = 10;
    std::size_t r = 1500;
    std::size_t mmd_block = 100;
};

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string p; std::getline(ss, p, ',');)
        out.push_back(p);
    return out;
}

ModelMode parse_mode(const std::string& s)
{
    if (s == "conditional" || s == "cond")
        return ModelMode::Conditional;
    if (s == "unconditional" || s == "uncond")
        return ModelMode::Unconditional;
    throw UsageError("unknown mode '" + s + "' (use conditional or unconditional)");
}

ModelBundle read_model(const std::string& path, RunManifest& man)
{
    man.add_input(path);
    return load_model(read_file(path));
}

Dataset read_dataset(const std::string& path, RunManifest& man)
{
    man.add_input(path);
    return load_dataset(path);
}

void write_dataset(const std::string& path, const Dataset& ds, RunManifest& man)
{
    save_dataset(path, ds);
    man.add_output(path);
}

void write_output_text(const std::string& path, const std::string& text, RunManifest& man)
{
    write_text(path, text);
    man.add_output(path);
}

// ---------------------------------------------------------------------------
// Commands

void cmd_generate(const Opts& o, const Common& c, RunManifest& man)
{
    SyntheticConfig cfg;
    if (!o.config.empty()) {
        man.add_input(o.config);
        cfg = parse_synthetic_config(read_text(o.config));
    }
    cfg.seed = c.seed;
    if (o.events)
        cfg.n_events = o.events;
    cfg.validate();
    const Dataset ds = generate_synthetic(cfg);
    write_dataset(o.out, ds, man);
    man.params["law"] = format_synthetic_config(cfg);
    std::cerr << "generated " << ds.size() << " events -> " << o.out << "\n";
}

void cmd_split(const Opts& o, const Common& c, RunManifest& man)
{
    const Dataset ds = read_dataset(o.in, man);
    const auto outs = split_list(o.out);
    std::vector<double> f;
    for (const auto& s : split_list(o.fractions))
        f.push_back(std::stod(s));
    if (f.size() != outs.size() || f.size() < 2)
        throw UsageError("--fractions and --out need the same number (>= 2) of entries");
    double total = 0.0;
    for (double x : f) {
        if (!(x > 0.0))
            throw UsageError("split fractions must be positive");
        total += x;
    }
    if (total > 1.0 + 1e-12)
        throw UsageError("split fractions sum to more than 1");
    std::mt19937_64 rng(mix64(c.seed));
    const auto idx = shuffled_indices(ds.size(), rng);
    std::size_t at = 0;
    for (std::size_t i = 0; i < f.size(); ++i) {
        const auto n = static_cast<std::size_t>(std::floor(f[i] * static_cast<double>(ds.size())));
        if (n == 0)
            throw UsageError("split part " + std::to_string(i) + " would be empty");
        const std::span<const std::size_t> part(idx.data() + at, n);
        at += n;
        const Dataset d = subset(ds, part,
                                 ds.provenance + "|split(seed=" + std::to_string(c.seed) + ",part=" +
                                     std::to_string(i) + ")");
        write_dataset(outs[i], d, man);
        std::cerr << "part " << i << ": " << d.size() << " events -> " << outs[i] << "\n";
    }
}

void cmd_fit(const Opts& o, const Common&, RunManifest& man)
{
    const Dataset ds = read_dataset(o.in, man);
    const ModelMode mode = parse_mode(o.mode);
    const MomentumBinning bins =
        mode == ModelMode::Conditional ? MomentumBinning::uniform(o.bins, o.p_max) : MomentumBinning::single();
    const ModelBundle m = fit_model(ds, mode, bins);
    write_file(o.out, save_model(m));
    man.add_output(o.out);
    const ComponentBits h = model_entropy(m);
    std::printf("%s model: %zu tables, %zu bins, H(q) = %.4f bits/event (hits %.4f, kinematics %.4f), hash %s\n",
                std::string(mode_name(mode)).c_str(), m.tables.size(), m.n_bins(), h.total(), h.hits(), h.kin,
                hex64(model_hash(m)).c_str());
}

void cmd_encode(const Opts& o, const Common&, RunManifest& man)
{
    const Dataset ds = read_dataset(o.in, man);
    const ModelBundle m = read_model(o.model, man);
    const auto [cd, acc] = encode_dataset(ds, m);
    write_file(o.out, save_compressed(cd));
    man.add_output(o.out);
    std::printf("%zu events: %zu payload bytes, %.4f bits/event (ideal %.4f)\n", ds.size(), cd.payload_bytes(),
                acc.mean_achieved(), acc.mean_ideal());
}

void cmd_decode(const Opts& o, const Common&, RunManifest& man)
{
    const ModelBundle m = read_model(o.model, man);
    man.add_input(o.in);
    const CompressedDataset cd = load_compressed(read_file(o.in));
    Dataset ds = decode_dataset(cd, m);
    ds.provenance = "decoded(" + fs::path(o.in).filename().string() + ")";
    write_dataset(o.out, ds, man);
    std::printf("decoded %zu events\n", ds.size());
}

void cmd_verify(const Opts& o, const Common&, RunManifest& man)
{
    const Dataset ds = read_dataset(o.in, man);
    const ModelBundle m = read_model(o.model, man);
    const ClosureReport rep = closure_check(ds, m);
    std::printf("closure: %s\nachieved %.0f bits, ideal %.2f bits, overhead %.6f%%\n", rep.equal ? "OK" : "FAILED",
                rep.achieved_bits, rep.ideal_bits, rep.overhead_pct);
    man.params["closure"] = rep.equal;
    if (!rep.equal)
        throw CheckFailed("closure failed: " + rep.diagnostic);
}

void cmd_audit(const Opts& o, const Common&, RunManifest& man)
{
    const Dataset a = read_dataset(o.train, man);
    const Dataset b = read_dataset(o.test, man);
    const ModelBundle m = read_model(o.model, man);
    const EntropyAudit au = entropy_audit(a, b, m);
    std::cout << audit_text(au);
    if (!o.csv.empty())
        write_output_text(o.csv, audit_csv(au), man);
}

void cmd_budget(const Opts& o, const Common&, RunManifest& man)
{
    const Dataset ds = read_dataset(o.in, man);
    const ModelBundle m = read_model(o.model, man);
    const BitBudget b = bit_budget(ideal_account(ds, m), ds);
    std::cout << budget_text(b);
    if (!o.csv.empty())
        write_output_text(o.csv, budget_csv(b), man);
}

void cmd_perturb(const Opts& o, const Common&, RunManifest& man)
{
    const Dataset ds = read_dataset(o.in, man);
    const Dataset p = apply_adc_scale(ds, o.eps);
    write_dataset(o.out, p, man);
    std::printf("eps %g: %.6f of occupied ADC entries changed\n", o.eps, changed_fraction(ds, p));
}

void cmd_scan(const Opts& o, const Common& c, RunManifest& man)
{
    const Dataset a = read_dataset(o.train, man);
    const Dataset b1 = read_dataset(o.b1, man);
    const Dataset b2 = read_dataset(o.b2, man);
    ScanOptions opt;
    opt.eps_grid = parse_eps_grid(o.eps_grid);
    opt.k = o.k;
    opt.r = o.r;
    opt.mmd_block = o.mmd_block;
    opt.seed = c.seed;
    opt.jobs = c.jobs;
    const ModelBundle u = fit_unconditional(a);
    const ModelBundle cm = fit_conditional(a, MomentumBinning::uniform(o.bins, o.p_max));
    const ScanResult s = run_scan(b1, b2, u, cm, opt);
    std::cout << scan_text(s);
    fs::create_directories(o.out_dir);
    write_output_text((fs::path(o.out_dir) / "scan.csv").string(), scan_csv(s), man);
    write_output_text((fs::path(o.out_dir) / "scan_detail.csv").string(), scan_detail_csv(s), man);
    write_output_text((fs::path(o.out_dir) / "scan_null.csv").string(), null_csv(s), man);
    man.params["bandwidth"] = s.bandwidth;
    man.params["block_size"] = s.block_size;
    man.params["null_block_size"] = s.null_block_size;
    man.params["mmd_block_size"] = s.mmd_block_size;
    man.params["mmd_null_block_size"] = s.mmd_null_block_size;
}

void cmd_gzip(const Opts& o, const Common&, RunManifest& man)
{
    man.add_input(o.in);
    const Bytes canon = read_file(o.in);
    const Dataset ds = canonical_deserialize(canon);
    const ModelBundle u = read_model(o.model_uncond, man);
    const ModelBundle cm = read_model(o.model_cond, man);
    if (u.mode != ModelMode::Unconditional || cm.mode != ModelMode::Conditional)
        throw UsageError("--model-uncond and --model-cond must hold an unconditional and a conditional model");
    std::vector<int> levels;
    for (const auto& s : split_list(o.levels)) {
        const int l = std::stoi(s);
        if (l < 1 || l > 9)
            throw UsageError("gzip levels must lie in 1..9");
        levels.push_back(l);
    }
    const auto su = save_compressed(encode_dataset(ds, u).first).size();
    const auto sc = save_compressed(encode_dataset(ds, cm).first).size();
    const CompressionTable t = gzip_compare(canon, su, sc, levels);
    for (const auto& w : t.warnings)
        std::cerr << "warning: " << w << "\n";
    std::cout << compression_text(t);
    if (!o.csv.empty())
        write_output_text(o.csv, compression_csv(t), man);
}

void cmd_report(const Opts& o, const Common&, RunManifest& man)
{
    fs::create_directories(o.out_dir);
    nlohmann::ordered_json index = nlohmann::ordered_json::array();
    std::set<std::string> names{"index.json", "report.manifest.json"};
    for (const auto& f : o.files)
        if (!names.insert(fs::path(f).filename().string()).second)
            throw UsageError("report inputs collide on the file name " + fs::path(f).filename().string());
    for (const auto& f : o.files) {
        man.add_input(f);
        const fs::path dst = fs::path(o.out_dir) / fs::path(f).filename();
        if (fs::exists(dst) && fs::equivalent(f, dst))
            throw UsageError("report input " + f + " already lives in the run directory");
        fs::copy_file(f, dst, fs::copy_options::overwrite_existing);
        man.add_output(dst);
        index.push_back({{"file", dst.filename().string()},
                         {"bytes", fs::file_size(dst)},
                         {"fnv1a64", RunManifest::file_hash(dst)}});
    }
    const fs::path idx = fs::path(o.out_dir) / "index.json";
    write_output_text(idx.string(), index.dump(2) + "\n", man);
    std::printf("bundled %zu files into %s\n", o.files.size(), o.out_dir.c_str());
}

// ---------------------------------------------------------------------------

std::string default_manifest(const std::string& command, const Opts& o)
{
    if (command == "scan")
        return (fs::path(o.out_dir) / "manifest.json").string();
    if (command == "report")
        return (fs::path(o.out_dir) / "report.manifest.json").string();
    if (!o.csv.empty())
        return o.csv + ".manifest.json";
    if (!o.out.empty())
        return split_list(o.out).front() + ".manifest.json";
    return o.in + "." + command + ".manifest.json";
}

nlohmann::ordered_json option_values(const CLI::App& sub)
{
    nlohmann::ordered_json p = nlohmann::ordered_json::object();
    for (const CLI::Option* opt : sub.get_options()) {
        if (opt->get_name() == "--help" || opt->get_lnames().empty())
            continue;
        const std::string key = opt->get_lnames().front();
        if (opt->count() > 0) {
            const auto& r = opt->results();
            p[key] = r.size() == 1 ? nlohmann::ordered_json(r.front()) : nlohmann::ordered_json(r);
        } else if (!opt->get_default_str().empty()) {
            p[key] = opt->get_default_str();
        }
    }
    return p;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"acfid: arithmetic-coding codelength tools for calorimeter event data"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    Opts o;
    Common c;
    std::map<CLI::App*, std::function<void(const Opts&, const Common&, RunManifest&)>> handlers;

    auto add = [&](const std::string& name, const std::string& help, auto fn) {
        CLI::App* s = app.add_subcommand(name, help);
        s->add_option("--seed", c.seed, "Master seed")->capture_default_str();
        s->add_option("--jobs", c.jobs, "Worker threads")->capture_default_str()->check(CLI::Range(1u, 1024u));
        s->add_option("--manifest", c.manifest, "Run manifest path (default: next to the main output)");
        handlers[s] = fn;
        return s;
    };
    auto binning = [&](CLI::App* s) {
        s->add_option("--bins", o.bins, "Momentum bins below --p-max")->capture_default_str()->check(CLI::Range(1, 4096));
        s->add_option("--p-max", o.p_max, "Upper edge of the last finite bin [GeV]")->capture_default_str();
    };

    auto* gen = add("generate", "Sample a synthetic dataset", cmd_generate);
    gen->add_option("--config", o.config, "Law parameters (key = value lines)")->check(CLI::ExistingFile);
    gen->add_option("--events", o.events, "Number of events (overrides the config)");
    gen->add_option("--out", o.out, "Output .evcan")->required();

    auto* spl = add("split", "Seeded disjoint split into parts", cmd_split);
    spl->add_option("--in", o.in, "Input .evcan")->required()->check(CLI::ExistingFile);
    spl->add_option("--fractions", o.fractions, "Comma-separated part fractions")->capture_default_str();
    spl->add_option("--out", o.out, "Comma-separated output paths, one per fraction")->required();

    auto* fit = add("fit", "Fit a frequency model", cmd_fit);
    fit->add_option("--in", o.in, "Training .evcan")->required()->check(CLI::ExistingFile);
    fit->add_option("--mode", o.mode, "conditional or unconditional")->capture_default_str();
    binning(fit);
    fit->add_option("--out", o.out, "Output .acm")->required();

    auto* enc = add("encode", "Arithmetic-code a dataset", cmd_encode);
    enc->add_option("--in", o.in, "Input .evcan")->required()->check(CLI::ExistingFile);
    enc->add_option("--model", o.model, "Model .acm")->required()->check(CLI::ExistingFile);
    enc->add_option("--out", o.out, "Output .acz")->required();

    auto* dec = add("decode", "Decode a compressed dataset", cmd_decode);
    dec->add_option("--in", o.in, "Input .acz")->required()->check(CLI::ExistingFile);
    dec->add_option("--model", o.model, "Model .acm used for encoding")->required()->check(CLI::ExistingFile);
    dec->add_option("--out", o.out, "Output .evcan")->required();

    auto* ver = add("verify", "Encode, decode and compare bytes", cmd_verify);
    ver->add_option("--in", o.in, "Input .evcan")->required()->check(CLI::ExistingFile);
    ver->add_option("--model", o.model, "Model .acm")->required()->check(CLI::ExistingFile);

    auto* aud = add("audit", "Entropy audit on training and held-out data", cmd_audit);
    aud->add_option("--train", o.train, "Training .evcan")->required()->check(CLI::ExistingFile);
    aud->add_option("--test", o.test, "Held-out .evcan")->required()->check(CLI::ExistingFile);
    aud->add_option("--model", o.model, "Model .acm")->required()->check(CLI::ExistingFile);
    aud->add_option("--csv", o.csv, "CSV output");

    auto* bud = add("budget", "Per layer-view bit budget", cmd_budget);
    bud->add_option("--in", o.in, "Input .evcan")->required()->check(CLI::ExistingFile);
    bud->add_option("--model", o.model, "Model .acm")->required()->check(CLI::ExistingFile);
    bud->add_option("--csv", o.csv, "CSV output");

    auto* per = add("perturb", "Scale occupied ADC values by 1 + eps", cmd_perturb);
    per->add_option("--in", o.in, "Input .evcan")->required()->check(CLI::ExistingFile);
    per->add_option("--eps", o.eps, "Scale perturbation")->required()->check(CLI::NonNegativeNumber);
    per->add_option("--out", o.out, "Output .evcan")->required();

    auto* scn = add("scan", "Sensitivity scan over eps", cmd_scan);
    scn->add_option("--train", o.train, "Model training split")->required()->check(CLI::ExistingFile);
    scn->add_option("--b1", o.b1, "Sample to perturb")->required()->check(CLI::ExistingFile);
    scn->add_option("--b2", o.b2, "Baseline sample")->required()->check(CLI::ExistingFile);
    scn->add_option("--eps-grid", o.eps_grid, "log:lo:hi:n, lin:lo:hi:n or a comma list")->capture_default_str();
    scn->add_option("--blocks", o.k, "Blocks K per sample")->capture_default_str()->check(CLI::Range(2, 100000));
    scn->add_option("--resamples", o.r, "Null resamples R")->capture_default_str()->check(CLI::Range(1, 10000000));
    scn->add_option("--mmd-block", o.mmd_block, "Events per MMD block")->capture_default_str()->check(
        CLI::Range(2, 100000));
    binning(scn);
    scn->add_option("--out-dir", o.out_dir, "Directory for scan CSVs")->required();

    auto* gz = add("gzip-compare", "Compare AC sizes with gzip levels", cmd_gzip);
    gz->add_option("--in", o.in, "Input .evcan")->required()->check(CLI::ExistingFile);
    gz->add_option("--model-uncond", o.model_uncond, "Unconditional .acm")->required()->check(CLI::ExistingFile);
    gz->add_option("--model-cond", o.model_cond, "Conditional .acm")->required()->check(CLI::ExistingFile);
    gz->add_option("--levels", o.levels, "Comma-separated gzip levels")->capture_default_str();
    gz->add_option("--csv", o.csv, "CSV output");

    auto* rep = add("report", "Bundle CSVs and manifests into a run directory", cmd_report);
    rep->add_option("--out-dir", o.out_dir, "Run directory")->required();
    rep->add_option("files", o.files, "CSV and manifest files")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    CLI::App* sub = app.get_subcommands().front();
    RunManifest man;
    man.command = sub->get_name();
    man.argv.assign(argv, argv + argc);
    man.seed = c.seed;
    man.params = option_values(*sub);
    const Stopwatch clock;
    int code = 0;
    try {
        handlers.at(sub)(o, c, man);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        code = 2;
    } catch (const HashMismatch& e) {
        std::cerr << "hash mismatch: " << e.what() << "\n";
        code = 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        code = 1;
    }
    man.wall_seconds = clock.seconds();
    man.exit_code = code;
    try {
        const std::string path = c.manifest.empty() ? default_manifest(man.command, o) : c.manifest;
        if (code == 0 || fs::exists(fs::path(path).parent_path().empty() ? "." : fs::path(path).parent_path()))
            man.save(path);
    } catch (const std::exception& e) {
        std::cerr << "warning: could not write manifest: " << e.what() << "\n";
    }
    return code;
}
