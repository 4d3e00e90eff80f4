#include "ecgicd/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "ecgicd/cohort.hpp"
#include "ecgicd/dataset.hpp"
#include "ecgicd/eval.hpp"
#include "ecgicd/icd.hpp"
#include "ecgicd/scoring.hpp"
#include "ecgicd/signal.hpp"
#include "ecgicd/timeparse.hpp"
#include "ecgicd/trainer.hpp"

namespace ecgicd::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void require_file(const std::string& path, const char* key) {
    if (path.empty())
        throw ConfigError(std::string("missing required config value [paths].") + key);
    if (!fs::exists(path))
        throw ConfigError("missing input file '" + path + "' (config key [paths]." + key + ")");
}

void write_metadata(const std::string& out_dir, const std::string& command) {
    // Timestamps live here and only here, so every other artifact is
    // byte-reproducible.
    json j;
    j["command"] = command;
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    j["written_at_unix"] = std::chrono::duration_cast<std::chrono::seconds>(now).count();
    std::ofstream out(fs::path(out_dir) / "metadata.json");
    out << j.dump(1, '\t') << '\n';
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct LoadedRun {
    data::LabeledDataset ds;
    train::SignalStore signals;
};

LoadedRun load_built_run(const RunConfig& cfg) {
    const fs::path out(cfg.out_dir);
    const std::string manifest_path = (out / "manifest.json").string();
    if (!fs::exists(manifest_path))
        throw ConfigError("no built dataset at '" + manifest_path + "'; run `build` first");
    LoadedRun run;
    std::string cache_path;
    run.ds = data::load_manifest(manifest_path, &cache_path);
    const auto rows = signal::read_manifest(cache_path);
    run.signals.reserve(rows.size());
    const std::string base = fs::path(cache_path).parent_path().string();
    for (const auto& row : rows) run.signals.push_back(signal::load_record(row, base));
    return run;
}

models::ModelConfig resolve_model_config(const RunConfig& cfg, std::size_t in_leads,
                                         std::size_t n_labels) {
    models::ModelConfig mc = models::ModelConfig::preset(cfg.model_preset);
    mc.in_leads = cfg.in_leads.value_or(in_leads);
    mc.n_labels = n_labels;
    mc.input_len = cfg.input_len.value_or(cfg.crop_len);
    mc.seed = cfg.model_seed;
    if (cfg.d_model) mc.d_model = *cfg.d_model;
    if (cfg.n_layers) mc.n_layers = *cfg.n_layers;
    if (cfg.d_state) mc.d_state = *cfg.d_state;
    if (cfg.base_width) mc.base_width = *cfg.base_width;
    if (cfg.stage_depths) mc.stage_depths = *cfg.stage_depths;
    if (cfg.dropout) mc.dropout = *cfg.dropout;
    mc.validate();
    return mc;
}

data::LabeledDataset fold_subset(const data::LabeledDataset& ds, int lo, int hi) {
    data::LabeledDataset out;
    out.label_set = ds.label_set;
    out.label_source = ds.label_source;
    for (const auto& r : ds.records)
        if (r.fold >= lo && r.fold <= hi) out.records.push_back(r);
    out.rebuild_matrix();
    return out;
}

}  // namespace

void cmd_build(const RunConfig& cfg) {
    require_file(cfg.signal_manifest, "signal_manifest");
    require_file(cfg.edstays, "edstays");
    require_file(cfg.admissions, "admissions");
    require_file(cfg.ed_diagnoses, "ed_diagnoses");
    require_file(cfg.hosp_diagnoses, "hosp_diagnoses");
    require_file(cfg.icd9_map, "icd9_map");

    const fs::path out(cfg.out_dir);
    fs::create_directories(out / "signals");

    const auto mapping = icd::MappingTable::load_tsv(cfg.icd9_map);
    const auto stays = cohort::StayIndex::from_tables(cfg.edstays, cfg.admissions);
    const auto ed_dx = cohort::DiagnosisTable::from_csv(cfg.ed_diagnoses, "stay_id");
    const auto hosp_dx = cohort::DiagnosisTable::from_csv(cfg.hosp_diagnoses, "hadm_id");
    const auto manifest_rows = signal::read_manifest(cfg.signal_manifest);
    const std::string manifest_base = fs::path(cfg.signal_manifest).parent_path().string();

    cohort::LinkStats link_stats;
    signal::PreprocessStats sig_stats;
    std::vector<data::RecordEntry> records;
    std::map<std::string, data::RecordDiagnoses> diagnoses;
    std::vector<signal::ManifestRow> cache_rows;
    std::map<std::string, std::uint64_t> label_counts;
    std::set<std::string> subjects;
    std::map<std::string, std::vector<std::size_t>> patient_records;
    std::map<std::string, std::set<std::string>> patient_codes;
    std::map<icd::Chapter, std::uint64_t> chapter_counts;
    std::uint64_t ed_source_records = 0;

    for (const auto& row : manifest_rows) {
        const auto linkage = stays.link_record(row.record_id, row.subject_id, row.ecg_time, &link_stats);
        if (linkage.site == cohort::Site::None) continue;

        data::RecordDiagnoses dx;
        if (linkage.ed_stay) {
            if (const auto* rows = ed_dx.find(*linkage.ed_stay))
                dx.ed = cohort::expand_raw_codes(*rows, mapping, cohort::StayKind::Ed, &link_stats);
        }
        if (linkage.hosp_admission) {
            if (const auto* rows = hosp_dx.find(*linkage.hosp_admission))
                dx.hosp = cohort::expand_raw_codes(*rows, mapping, cohort::StayKind::Hosp, &link_stats);
        }
        const auto& combined = dx.hosp.empty() ? dx.ed : dx.hosp;
        if (combined.empty()) {
            ++link_stats.discarded_empty_diagnoses;
            continue;
        }

        // Preprocess once, cache at 100 Hz.
        const auto raw = signal::load_record(row, manifest_base);
        const auto clean = signal::preprocess(raw, 100.0, 3.0f, &sig_stats);
        const std::string rel = "signals/" + row.record_id + ".bin";
        signal::write_ecg1((out / rel).string(), clean);
        signal::ManifestRow cache_row = row;
        cache_row.fs = 100.0;
        cache_row.n_samples = static_cast<std::uint32_t>(clean.n_samples());
        cache_row.path = rel;

        data::RecordEntry rec;
        rec.record_id = row.record_id;
        rec.subject_id = row.subject_id;
        rec.site = linkage.site;
        rec.stay_key = linkage.site == cohort::Site::Ed ? *linkage.ed_stay : *linkage.hosp_admission;
        rec.ecg_time = row.ecg_time;
        rec.signal_index = static_cast<std::uint32_t>(cache_rows.size());
        cache_rows.push_back(std::move(cache_row));

        for (const auto& code : combined) {
            ++label_counts[code.text];
            ++chapter_counts[icd::chapter_of(code)];
            patient_codes[rec.subject_id].insert(code.text);
        }
        if (dx.hosp.empty()) ++ed_source_records;
        subjects.insert(rec.subject_id);
        patient_records[rec.subject_id].push_back(records.size());
        diagnoses[rec.record_id] = std::move(dx);
        records.push_back(std::move(rec));
    }
    if (records.empty()) throw data::EmptySplit("no linkable records with diagnoses");

    const auto folds = data::assign_folds(subjects, cfg.fold_seed, cfg.n_folds);
    for (auto& rec : records) rec.fold = folds.fold_of.at(rec.subject_id);

    const auto label_set = icd::select_label_set(label_counts, cfg.label_threshold);
    auto ds = data::build_matrix(std::move(records), diagnoses, label_set);

    // Reproducibility artifacts.
    folds.save_csv((out / "folds.csv").string());
    label_set.save_csv((out / "labels.csv").string(), &label_counts);
    signal::write_manifest((out / "signal_cache.csv").string(), cache_rows);
    data::save_manifest((out / "manifest.json").string(), ds, cfg.fold_seed,
                        (out / "labels.csv").string(), (out / "signal_cache.csv").string(),
                        cfg.scenario);
    cfg.save((out / "config.toml").string());

    // Descriptive statistics (per-chapter label distribution and the
    // cohort counts used by the conditional full-data check).
    json stats;
    stats["samples"] = ds.records.size();
    stats["patients"] = subjects.size();
    std::uint64_t ed_records = 0, hosp_records = 0, ed_site_ed_source = 0;
    std::map<std::string, std::uint64_t> ed_patient_set;
    for (const auto& r : ds.records) {
        if (r.site == cohort::Site::Ed) {
            ++ed_records;
            ++ed_patient_set[r.subject_id];
            if (!r.has_hosp_labels) ++ed_site_ed_source;
        } else {
            ++hosp_records;
        }
    }
    stats["ed_samples"] = ed_records;
    stats["hosp_samples"] = hosp_records;
    stats["ed_subset"] = {
        {"samples", ed_records},
        {"patients", ed_patient_set.size()},
        {"ratio_ed_statements",
         ed_records == 0 ? 0.0 : static_cast<double>(ed_site_ed_source) / static_cast<double>(ed_records)}};
    stats["ratio_ed_statements"] =
        static_cast<double>(ed_source_records) / static_cast<double>(ds.records.size());
    {
        std::vector<double> recs_per_patient, codes_per_patient;
        for (const auto& [subject, idx] : patient_records)
            recs_per_patient.push_back(static_cast<double>(idx.size()));
        for (const auto& [subject, codes] : patient_codes)
            codes_per_patient.push_back(static_cast<double>(codes.size()));
        stats["ecg_per_patient_median"] = median(std::move(recs_per_patient));
        stats["codes_per_patient_median"] = median(std::move(codes_per_patient));
    }
    stats["labels"] = {{"n_labels", label_set.size()}, {"threshold", cfg.label_threshold}};
    stats["zero_rows"] = ds.zero_rows;
    stats["discards"] = {{"unlinked", link_stats.unlinked},
                         {"empty_diagnoses", link_stats.discarded_empty_diagnoses}};
    stats["warnings"] = {{"overlapping_intervals", link_stats.overlapping_intervals},
                         {"malformed_codes_skipped", link_stats.malformed_codes_skipped},
                         {"unmappable_icd9_skipped", link_stats.unmappable_icd9_skipped},
                         {"oversize_code_lists", link_stats.oversize_code_lists},
                         {"all_missing_leads", sig_stats.all_missing_leads},
                         {"interpolated_values", sig_stats.interpolated_values},
                         {"boundary_zero_fills", sig_stats.boundary_zero_fills},
                         {"clipped_values", sig_stats.clipped_values}};
    json chapters = json::array();
    std::uint64_t total_statements = 0;
    for (const auto& [ch, n] : chapter_counts) total_statements += n;
    for (const auto& [ch, n] : chapter_counts) {
        chapters.push_back({{"chapter", icd::to_roman(ch)},
                            {"count", n},
                            {"fraction_of_samples",
                             static_cast<double>(n) / static_cast<double>(ds.records.size())},
                            {"fraction_of_statements",
                             static_cast<double>(n) / static_cast<double>(total_statements)}});
    }
    stats["chapter_distribution"] = std::move(chapters);
    std::ofstream stats_out(out / "stats.json");
    stats_out << stats.dump(1, '\t') << '\n';
    write_metadata(cfg.out_dir, "build");

    std::cout << "build: " << ds.records.size() << " records, " << subjects.size() << " patients, "
              << label_set.size() << " labels (threshold " << cfg.label_threshold << ")\n"
              << "build: discarded " << link_stats.unlinked << " unlinked, "
              << link_stats.discarded_empty_diagnoses << " with empty diagnoses\n";
}

void cmd_train(const RunConfig& cfg) {
    auto run = load_built_run(cfg);
    const auto spec = data::ScenarioSpec::parse(cfg.scenario);

    // Folds 1..n-2 train, n-1 validation, n test.
    const int val_fold = cfg.n_folds - 1;
    auto train_view =
        data::apply_scenario(fold_subset(run.ds, 1, val_fold - 1), spec, data::Phase::Train);
    auto val_view = data::apply_scenario(
        fold_subset(data::eval_view(run.ds, val_fold, cfg.n_folds), val_fold, val_fold), spec,
        data::Phase::Train);
    if (train_view.records.empty()) throw data::EmptySplit("train after scenario filter");
    if (val_view.records.empty()) throw data::EmptySplit("validation after scenario filter");

    std::size_t in_leads = run.signals.empty() ? 12 : run.signals[0].n_leads();
    const auto mc = resolve_model_config(cfg, in_leads, run.ds.label_set.size());

    train::TrainConfig tc;
    tc.lr = cfg.lr;
    tc.weight_decay = cfg.weight_decay;
    tc.epochs = cfg.epochs;
    tc.batch_size = cfg.batch_size;
    tc.crop_len = cfg.crop_len;
    tc.seed = cfg.train_seed;
    tc.early_stop_val_auroc = cfg.early_stop_val_auroc;

    const auto result = train::train(mc, tc, train_view, val_view, run.signals);

    const fs::path out(cfg.out_dir);
    result.best.save((out / "checkpoint.bin").string());
    train::save_train_log((out / "train_log.jsonl").string(), result.log);
    write_metadata(cfg.out_dir, "train");
    std::cout << "train: selected epoch " << result.selected_epoch << " with val macro AUROC "
              << result.best.val_macro_auroc << "\n";
}

void cmd_eval(const RunConfig& cfg, const EvalOptions& opts) {
    const fs::path out(cfg.out_dir);
    fs::create_directories(out / "tables");
    std::map<std::string, std::string> descriptions;
    if (!cfg.descriptions.empty() && fs::exists(cfg.descriptions))
        descriptions = icd::load_descriptions_tsv(cfg.descriptions);

    if (!opts.auroc_csv.empty()) {
        // Table-only mode: published or previously computed per-code
        // AUROCs in, coverage/chapter tables out.
        const auto report = eval::EvalReport::load_csv(opts.auroc_csv);
        const auto coverage = eval::coverage_table(report, cfg.coverage_threshold,
                                                   descriptions.empty() ? nullptr : &descriptions);
        eval::save_coverage_csv((out / "tables" / "coverage.csv").string(), coverage);
        eval::save_chapter_csv((out / "tables" / "chapter_auroc.csv").string(),
                               eval::chapter_macro(report));
        write_metadata(cfg.out_dir, "eval");
        std::cout << "eval: coverage tables for " << report.labels.size() << " codes from "
                  << opts.auroc_csv << "\n";
        return;
    }

    auto run = load_built_run(cfg);
    const std::string scenario_str = opts.scenario.empty() ? cfg.scenario : opts.scenario;
    const auto spec = data::ScenarioSpec::parse(scenario_str);
    auto test_view = data::apply_scenario(
        fold_subset(data::eval_view(run.ds, cfg.n_folds - 1, cfg.n_folds), cfg.n_folds, cfg.n_folds),
        spec, data::Phase::Eval);
    if (test_view.records.empty()) throw data::EmptySplit("test after scenario filter");

    eval::PredictionMatrix p;
    if (opts.oracle_scores) {
        p.label_set = test_view.label_set;
        p.n = test_view.records.size();
        p.m = test_view.label_set.size();
        p.scores.assign(p.n * p.m, 0.0);
        for (std::size_t i = 0; i < p.n; ++i) {
            p.record_ids.push_back(test_view.records[i].record_id);
            for (std::size_t j = 0; j < p.m; ++j) p.at(i, j) = test_view.y.get(i, j) ? 1.0 : 0.0;
        }
    } else {
        const std::string ckpt_path =
            opts.checkpoint.empty() ? (out / "checkpoint.bin").string() : opts.checkpoint;
        if (!fs::exists(ckpt_path)) throw ConfigError("missing checkpoint '" + ckpt_path + "'");
        const auto ckpt = models::Checkpoint::load(ckpt_path);
        if (!ckpt.label_set_digest.empty() &&
            ckpt.label_set_digest != run.ds.label_set.digest())
            throw LabelSetMismatch();
        auto model = models::build_model<float>(ckpt.config);
        ckpt.apply_to(*model);
        p = eval::predict_matrix(*model, test_view, run.signals, cfg.crop_len);
    }

    const auto report =
        eval::bootstrap_ci(p, test_view.y, cfg.n_boot, cfg.alpha, cfg.eval_seed, cfg.threads);
    report.save_json((out / "report.json").string());
    report.save_csv((out / "report.csv").string(), descriptions.empty() ? nullptr : &descriptions);
    const auto coverage = eval::coverage_table(report, cfg.coverage_threshold,
                                               descriptions.empty() ? nullptr : &descriptions);
    eval::save_coverage_csv((out / "tables" / "coverage.csv").string(), coverage);
    eval::save_chapter_csv((out / "tables" / "chapter_auroc.csv").string(), eval::chapter_macro(report));
    eval::save_mcc_csv((out / "tables" / "mcc.csv").string(), eval::mcc_matrix(test_view.y),
                       test_view.label_set);
    write_metadata(cfg.out_dir, "eval");
    std::cout << "eval: " << scenario_str << " macro AUROC " << report.macro.point << " ("
              << report.macro.low << "-" << report.macro.high << ") over "
              << test_view.records.size() << " records\n";
}

void cmd_compare(const RunConfig& cfg, const std::string& checkpoint_a,
                 const std::string& checkpoint_b, const std::string& scenario) {
    auto run = load_built_run(cfg);
    const std::string scenario_str = scenario.empty() ? cfg.scenario : scenario;
    const auto spec = data::ScenarioSpec::parse(scenario_str);
    auto test_view = data::apply_scenario(
        fold_subset(data::eval_view(run.ds, cfg.n_folds - 1, cfg.n_folds), cfg.n_folds, cfg.n_folds),
        spec, data::Phase::Eval);
    if (test_view.records.empty()) throw data::EmptySplit("test after scenario filter");

    auto score = [&](const std::string& path) {
        if (!fs::exists(path)) throw ConfigError("missing checkpoint '" + path + "'");
        const auto ckpt = models::Checkpoint::load(path);
        if (!ckpt.label_set_digest.empty() && ckpt.label_set_digest != run.ds.label_set.digest())
            throw LabelSetMismatch();
        auto model = models::build_model<float>(ckpt.config);
        ckpt.apply_to(*model);
        return eval::predict_matrix(*model, test_view, run.signals, cfg.crop_len);
    };
    const auto pa = score(checkpoint_a);
    const auto pb = score(checkpoint_b);
    const auto paired =
        eval::paired_significance(pa, pb, test_view.y, cfg.n_boot, cfg.alpha, cfg.eval_seed, cfg.threads);
    const fs::path out(cfg.out_dir);
    fs::create_directories(out / "tables");
    paired.save_csv((out / "tables" / "significance.csv").string());
    write_metadata(cfg.out_dir, "compare");
    std::cout << "compare: macro diff " << paired.macro_diff.point << " (" << paired.macro_diff.low
              << "-" << paired.macro_diff.high << "), A better on " << paired.a_better
              << " labels, B better on " << paired.b_better << " of "
              << test_view.label_set.size() << "\n";
}

void dump_chapters(std::ostream& os) {
    os << "chapter,range_lo,range_hi,title\n";
    for (const auto& r : icd::chapter_ranges())
        os << icd::to_roman(r.chapter) << ',' << r.lo << ',' << r.hi << ',' << r.title << '\n';
}

}  // namespace ecgicd::cli
