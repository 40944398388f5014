#include "cli/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include <CLI11.hpp>

#include "core/kernels.hpp"
#include "eval/evaluator.hpp"

namespace omnivl::cli {

namespace fs = std::filesystem;

namespace {

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "seed",
        "corpus.manifest",
        "corpus.group_identical_captions",
        "model.preset",
        "model.dim",
        "model.heads",
        "model.blocks",
        "model.ffn_hidden",
        "model.patch",
        "model.tubelet",
        "model.image_h",
        "model.image_w",
        "model.video_frames",
        "model.text_len",
        "model.proj_dim",
        "objectives.bank_size",
        "objectives.momentum",
        "objectives.tau_init",
        "objectives.normalize_positives",
        "objectives.lambda_univlc",
        "objectives.lambda_vlm",
        "objectives.lambda_lm",
        "schedule.paradigm",
        "schedule.stage1.epochs",
        "schedule.stage1.steps",
        "schedule.stage1.batch_image",
        "schedule.stage1.batch_video",
        "schedule.stage1.peak_lr",
        "schedule.stage1.warmup_steps",
        "schedule.stage1.decay_rate",
        "schedule.stage2.epochs",
        "schedule.stage2.steps",
        "schedule.stage2.batch_image",
        "schedule.stage2.batch_video",
        "schedule.stage2.peak_lr",
        "schedule.stage2.warmup_steps",
        "schedule.stage2.decay_rate",
        "train.log_every",
        "train.checkpoint_every",
        "eval.split",
        "eval.k",
        "eval.max_len",
        "eval.beam",
        "eval.prefix",
        "eval.retrieval_finetune_steps",
        "eval.qa_steps",
        "eval.qa_lr",
        "eval.qa_batch",
    };
    return keys;
}

ModelConfig model_from_config(const KeyValueConfig& cfg, const Corpus& corpus) {
    ModelConfig mc;
    mc.apply_preset(cfg.str("model.preset", "desk"));
    // image geometry defaults to whatever the corpus actually contains
    i64 image_h = 0, image_w = 0, frames = 0;
    for (const auto& item : corpus.items) {
        if (item.modality == Modality::image && image_h == 0) {
            image_h = item.frames.dim(1);
            image_w = item.frames.dim(2);
        }
        if (item.modality == Modality::video && frames == 0) frames = item.frames.dim(0);
        if (image_h == 0 && item.modality == Modality::video) {
            image_h = item.frames.dim(1);
            image_w = item.frames.dim(2);
        }
    }
    mc.dim = cfg.integer("model.dim", 32);
    mc.heads = static_cast<int>(cfg.integer("model.heads", 4));
    mc.blocks = cfg.integer("model.blocks", 2);
    mc.ffn_hidden = cfg.integer("model.ffn_hidden", 0);
    mc.patch = cfg.integer("model.patch", 8);
    mc.tubelet = cfg.integer("model.tubelet", 1);
    mc.image_h = cfg.integer("model.image_h", image_h > 0 ? image_h : 16);
    mc.image_w = cfg.integer("model.image_w", image_w > 0 ? image_w : 16);
    mc.video_frames = cfg.integer("model.video_frames", frames > 0 ? frames : 4);
    mc.text_len = cfg.integer("model.text_len", 16);
    mc.proj_dim = cfg.integer("model.proj_dim", 16);
    mc.validate();
    return mc;
}

StageConfig stage_from_config(const KeyValueConfig& cfg, const std::string& prefix) {
    StageConfig st;
    st.epochs = cfg.integer(prefix + ".epochs", 4);
    st.steps = cfg.integer(prefix + ".steps", 0);
    st.batch_image = cfg.integer(prefix + ".batch_image", 8);
    st.batch_video = cfg.integer(prefix + ".batch_video", 8);
    st.peak_lr = cfg.num(prefix + ".peak_lr", prefix == "schedule.stage1" ? 3e-3 : 1e-3);
    st.warmup_steps = cfg.integer(prefix + ".warmup_steps", 10);
    st.decay_rate = cfg.num(prefix + ".decay_rate", 0.85);
    return st;
}

ScheduleConfig schedule_from_config(const KeyValueConfig& cfg) {
    ScheduleConfig sc;
    sc.paradigm = parse_paradigm(cfg.str("schedule.paradigm", "decoupled"));
    sc.stage1 = stage_from_config(cfg, "schedule.stage1");
    sc.stage2 = stage_from_config(cfg, "schedule.stage2");
    return sc;
}

TrainOptions train_options_from_config(const KeyValueConfig& cfg, const std::string& outdir) {
    TrainOptions opt;
    opt.seed = static_cast<uint64_t>(cfg.integer("seed", 0));
    opt.weights.lambda_univlc = cfg.num("objectives.lambda_univlc", 1.0);
    opt.weights.lambda_vlm = cfg.num("objectives.lambda_vlm", 1.0);
    opt.weights.lambda_lm = cfg.num("objectives.lambda_lm", 1.0);
    opt.momentum_coeff = cfg.num("objectives.momentum", 0.995);
    opt.bank_size = cfg.integer("objectives.bank_size", 1024);
    opt.normalize_positives = cfg.flag("objectives.normalize_positives", true);
    opt.log_every = cfg.integer("train.log_every", 1);
    opt.checkpoint_every = cfg.integer("train.checkpoint_every", 0);
    opt.outdir = outdir;
    opt.config_text = cfg.resolved_text();
    return opt;
}

Corpus corpus_from_config(const KeyValueConfig& cfg) {
    const std::string manifest = cfg.str("corpus.manifest", "");
    if (manifest.empty()) throw ConfigError("config key corpus.manifest is required");
    return load_manifest(manifest, PromptTemplates::defaults(),
                         cfg.flag("corpus.group_identical_captions", false));
}

int cmd_synth(const std::string& outdir, const SynthParams& params) {
    Corpus corpus = synth_corpus(params);
    save_manifest(corpus, outdir);
    std::cout << "wrote " << corpus.items.size() << " triplets to " << outdir << "/manifest.jsonl"
              << std::endl;
    return 0;
}

int cmd_pretrain(KeyValueConfig cfg, const std::string& outdir, const std::string& resume) {
    cfg.validate_keys(known_keys());
    fs::create_directories(outdir);

    Corpus corpus = corpus_from_config(cfg);
    Vocabulary vocab = Vocabulary::build(corpus.all_texts());
    ModelConfig mc = model_from_config(cfg, corpus);
    mc.vocab_size = vocab.size();

    const uint64_t seed = static_cast<uint64_t>(cfg.integer("seed", 0));
    OmniVLModel model(mc, seed, cfg.num("objectives.tau_init", 0.07));
    MomentumEncoders momentum(mc, seed);
    TrainOptions opt = train_options_from_config(cfg, outdir);

    {
        std::ofstream snap(fs::path(outdir) / "config.resolved");
        snap << opt.config_text;
        vocab.save((fs::path(outdir) / "vocab.txt").string());
    }

    Trainer trainer(model, momentum, corpus, vocab, schedule_from_config(cfg), opt);
    if (!resume.empty()) trainer.resume(resume);
    auto metrics = trainer.run();
    std::cout << "pretrain: " << trainer.global_step() << " steps";
    if (!metrics.empty()) std::cout << ", final loss " << metrics.back().loss_total;
    std::cout << std::endl;
    return 0;
}

struct EvalContext {
    KeyValueConfig cfg;
    Corpus corpus;
    Vocabulary vocab;
    std::unique_ptr<OmniVLModel> model;
};

EvalContext make_eval_context(const std::string& checkpoint, const std::string& manifest_flag) {
    CheckpointInfo info = peek_checkpoint(checkpoint);
    EvalContext ctx;
    ctx.cfg = KeyValueConfig::parse_text(info.config_text);
    if (!manifest_flag.empty()) ctx.cfg.set("corpus.manifest", manifest_flag);
    ctx.corpus = corpus_from_config(ctx.cfg);
    std::istringstream vt(info.vocab_text);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(vt, line)) lines.push_back(line);
    ctx.vocab = Vocabulary::from_lines(std::move(lines));
    ModelConfig mc = model_from_config(ctx.cfg, ctx.corpus);
    mc.vocab_size = ctx.vocab.size();
    ctx.model = std::make_unique<OmniVLModel>(mc, 0);
    load_model_weights(checkpoint, *ctx.model);
    return ctx;
}

void write_report_line(std::ofstream& os, const std::string& json) { os << json << "\n"; }

std::string retrieval_json(const char* tag, const RetrievalResult& r) {
    auto d = [](const RetrievalDirection& x) {
        return std::string("{\"r1\":") + format_double(x.r1) + ",\"r5\":" + format_double(x.r5) +
               ",\"r10\":" + format_double(x.r10) + "}";
    };
    return std::string("{\"task\":\"") + tag + "\",\"t2v\":" + d(r.t2v) +
           ",\"v2t\":" + d(r.v2t) + "}";
}

int cmd_eval(const std::string& checkpoint, const std::string& task,
             const std::string& manifest_flag, const std::string& outdir, i64 k_flag,
             i64 max_len_flag, int beam_flag, bool plot) {
    static const std::set<std::string> valid = {"retrieval", "zeroshot", "probe",
                                                "caption",   "qa",       "ablate"};
    if (!valid.count(task)) {
        std::string names;
        for (const auto& t : valid) names += (names.empty() ? "" : ", ") + t;
        throw ConfigError("invalid task '" + task + "'; valid tasks: " + names);
    }
    EvalContext ctx = make_eval_context(checkpoint, manifest_flag);
    fs::create_directories(outdir);
    std::ofstream report(fs::path(outdir) / ("report_" + task + ".jsonl"));

    const std::string split = ctx.cfg.str("eval.split", "eval");
    auto eval_ids = ctx.corpus.indices(split);
    if (eval_ids.empty()) eval_ids = ctx.corpus.indices("train");
    const i64 k = k_flag > 0 ? k_flag : ctx.cfg.integer("eval.k", 128);

    if (task == "retrieval" || task == "zeroshot") {
        if (task == "retrieval") {
            const i64 ft = ctx.cfg.integer("eval.retrieval_finetune_steps", 0);
            if (ft > 0) {
                // alignment-only fine-tune: UniVLC + VLM, no LM
                ScheduleConfig sc;
                sc.paradigm = ctx.corpus.has_modality(Modality::video)
                                  ? (ctx.corpus.has_modality(Modality::image)
                                         ? Paradigm::joint_scratch
                                         : Paradigm::video_only)
                                  : Paradigm::image_only;
                sc.stage1.steps = ft;
                sc.stage2.steps = 1;
                sc.stage1.peak_lr = sc.stage2.peak_lr = 1e-4;
                sc.stage1.warmup_steps = sc.stage2.warmup_steps = 1;
                MomentumEncoders momentum(ctx.model->cfg, 0);
                momentum.sync_from(ctx.model->registry);
                TrainOptions opt = train_options_from_config(ctx.cfg, "");
                opt.weights.lambda_lm = 0.0;
                Trainer t(*ctx.model, momentum, ctx.corpus, ctx.vocab, sc, opt);
                t.run();
            }
        }
        RetrievalResult r = retrieve(*ctx.model, ctx.corpus, eval_ids, ctx.vocab, k);
        const std::string json = retrieval_json(task.c_str(), r);
        write_report_line(report, json);
        std::cout << json << std::endl;
        if (plot) {
            std::ofstream curve(fs::path(outdir) / "recall_curve.csv");
            curve << "k,t2v_recall,v2t_recall\n";
            curve << "1," << format_double(r.t2v.r1) << "," << format_double(r.v2t.r1) << "\n";
            curve << "5," << format_double(r.t2v.r5) << "," << format_double(r.v2t.r5) << "\n";
            curve << "10," << format_double(r.t2v.r10) << "," << format_double(r.v2t.r10) << "\n";
        }
    } else if (task == "probe") {
        auto train_ids = ctx.corpus.indices("train");
        ProbeResult pr = probe_encoder(*ctx.model, ctx.corpus, train_ids, eval_ids,
                                       static_cast<uint64_t>(ctx.cfg.integer("seed", 0)));
        const std::string json = "{\"task\":\"probe\",\"accuracy\":" + format_double(pr.accuracy) +
                                 ",\"frozen_encoder\":" + (pr.frozen_encoder ? "true" : "false") +
                                 "}";
        write_report_line(report, json);
        std::cout << json << std::endl;
    } else if (task == "caption") {
        GenerationConfig gc;
        gc.max_len = max_len_flag > 0 ? max_len_flag : ctx.cfg.integer("eval.max_len", 16);
        gc.beam = beam_flag > 0 ? beam_flag : static_cast<int>(ctx.cfg.integer("eval.beam", 1));
        gc.prefix = ctx.cfg.str("eval.prefix", "");
        CaptionEval ce = caption_eval(*ctx.model, ctx.corpus, eval_ids, ctx.vocab, gc);
        const std::string json = "{\"task\":\"caption\",\"bleu4\":" + format_double(ce.bleu) +
                                 ",\"exact\":" + format_double(ce.exact) + "}";
        write_report_line(report, json);
        for (size_t i = 0; i < ce.generated.size(); ++i)
            write_report_line(report, "{\"caption\":\"" + ce.generated[i] + "\"}");
        std::cout << json << std::endl;
    } else if (task == "qa") {
        const uint64_t seed = static_cast<uint64_t>(ctx.cfg.integer("seed", 0));
        qa_finetune(*ctx.model, ctx.corpus, ctx.corpus.indices("train"), ctx.vocab,
                    ctx.cfg.integer("eval.qa_steps", 60), ctx.cfg.num("eval.qa_lr", 1e-3),
                    ctx.cfg.integer("eval.qa_batch", 8), seed);
        QaEval qe = qa_eval(*ctx.model, ctx.corpus, eval_ids, ctx.vocab,
                            max_len_flag > 0 ? max_len_flag : 8);
        const std::string json =
            "{\"task\":\"qa\",\"accuracy\":" + format_double(qe.accuracy) + "}";
        write_report_line(report, json);
        std::cout << json << std::endl;
    } else {  // ablate
        AblationConfig ac;
        ac.model = ctx.model->cfg;
        ac.schedule = schedule_from_config(ctx.cfg);
        ac.train = train_options_from_config(ctx.cfg, "");
        ac.eval_k = k;
        ac.qa_steps = ctx.cfg.integer("eval.qa_steps", 40);
        ac.qa_lr = ctx.cfg.num("eval.qa_lr", 1e-3);
        ac.qa_batch = ctx.cfg.integer("eval.qa_batch", 8);
        AblationTable table = ablate_paradigms(ctx.corpus, ctx.vocab, ac);
        std::ofstream tf(fs::path(outdir) / "ablation_table.txt");
        tf << table.formatted();
        std::cout << table.formatted();
        for (const auto& row : table.rows) {
            std::string json = "{\"paradigm\":\"" + row.paradigm + "\"";
            if (row.has_image_tasks) {
                json += ",\"img_tr1\":" + format_double(row.img_tr1);
                json += ",\"img_ir1\":" + format_double(row.img_ir1);
            }
            json += ",\"vid_ir1\":" + format_double(row.vid_ir1) + "}";
            write_report_line(report, json);
        }
    }
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    CLI::App app{"desk-scale unified image/video-language pretraining"};
    app.require_subcommand(1);

    std::string kernels_flag = "parallel";
    app.add_option("--kernels", kernels_flag, "compute backend: parallel|serial");

    // synth
    auto* synth = app.add_subcommand("synth", "materialize a synthetic triplet corpus");
    std::string synth_outdir;
    SynthParams sp;
    i64 synth_seed = 0;
    synth->add_option("--outdir", synth_outdir, "output directory")->required();
    synth->add_option("--seed", synth_seed, "rng seed");
    synth->add_option("--classes", sp.n_classes, "number of classes");
    synth->add_option("--per-class", sp.n_per_class, "train samples per class");
    synth->add_option("--eval-per-class", sp.eval_per_class, "held-out samples per class");
    synth->add_option("--image-size", sp.image_size, "square frame size");
    synth->add_option("--video-frames", sp.video_frames, "frames per clip");
    synth->add_option("--video-fraction", sp.video_fraction, "fraction of video classes");

    // pretrain
    auto* pre = app.add_subcommand("pretrain", "run the pretraining schedule");
    std::string pre_config, pre_outdir, pre_resume;
    std::vector<std::string> pre_overrides;
    i64 pre_seed = -1;
    pre->add_option("--config", pre_config, "config file")->required();
    pre->add_option("--outdir", pre_outdir, "output directory")->required();
    pre->add_option("--seed", pre_seed, "seed override");
    pre->add_option("--override", pre_overrides, "config override key=value")->take_all();
    pre->add_option("--resume", pre_resume, "checkpoint to resume from");

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
    std::string ev_ckpt, ev_task, ev_manifest, ev_outdir = ".";
    std::vector<std::string> ev_overrides;
    i64 ev_k = 0, ev_max_len = 0;
    int ev_beam = 0;
    bool ev_plot = false;
    ev->add_option("--checkpoint", ev_ckpt, "checkpoint file")->required();
    ev->add_option("--task", ev_task, "retrieval|zeroshot|probe|caption|qa|ablate")->required();
    ev->add_option("--manifest", ev_manifest, "corpus manifest override");
    ev->add_option("--outdir", ev_outdir, "report directory");
    ev->add_option("--k", ev_k, "rerank shortlist size");
    ev->add_option("--max-len", ev_max_len, "generation length cap");
    ev->add_option("--beam", ev_beam, "beam width");
    ev->add_flag("--plot", ev_plot, "write plot-data csv");

    try {
        std::vector<const char*> argv;
        argv.push_back("omnivl");
        for (const auto& a : args) argv.push_back(a.c_str());
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        kernels::set_backend(kernels_flag == "serial" ? kernels::Backend::serial
                                                      : kernels::Backend::parallel);
        if (synth->parsed()) {
            sp.seed = static_cast<uint64_t>(synth_seed);
            return cmd_synth(synth_outdir, sp);
        }
        if (pre->parsed()) {
            KeyValueConfig cfg = KeyValueConfig::parse_file(pre_config);
            for (const auto& ov : pre_overrides) cfg.apply_override(ov);
            if (pre_seed >= 0) cfg.set("seed", std::to_string(pre_seed));
            return cmd_pretrain(std::move(cfg), pre_outdir, pre_resume);
        }
        if (ev->parsed()) {
            return cmd_eval(ev_ckpt, ev_task, ev_manifest, ev_outdir, ev_k, ev_max_len, ev_beam,
                            ev_plot);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << std::endl;
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 2;
    } catch (const ArgError& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "filesystem error: " << e.what() << std::endl;
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << std::endl;
        return 3;
    }
    return 0;
}

}  // namespace omnivl::cli
