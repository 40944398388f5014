#include "eval/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "core/kernels.hpp"

namespace omnivl {

ItemEmbeddings embed_items(OmniVLModel& model, const Corpus& corpus,
                           const std::vector<size_t>& idx, const Vocabulary& vocab) {
    if (idx.empty()) throw ArgError("embed_items: empty item list");
    ItemEmbeddings out;
    const i64 n = static_cast<i64>(idx.size());
    out.vis_proj = Tensor({n, model.cfg.proj_dim});
    out.txt_proj = Tensor({n, model.cfg.proj_dim});
    for (i64 i = 0; i < n; ++i) {
        const Triplet& item = corpus.items[idx[static_cast<size_t>(i)]];
        Tape t;
        VisualBatch vb = make_visual_batch(corpus, {idx[static_cast<size_t>(i)]}, model.cfg.patch,
                                           model.cfg.tubelet);
        EncodedVisual enc = model.ve.encode(t, vb);
        Tensor toks({enc.tokens->val.dim(1), enc.tokens->val.dim(2)});
        kernels::copy(enc.tokens->val.ptr(), toks.ptr(), toks.numel());
        out.vis_tokens.push_back(std::move(toks));

        Var vp = model.project_visual(t, enc.v_cls);
        kernels::copy(vp->val.ptr(), out.vis_proj.ptr() + i * model.cfg.proj_dim,
                      model.cfg.proj_dim);

        TokenSequence ts = tokenize_text(item.text, vocab, model.cfg.text_len);
        EncodedText te = model.te.encode(t, ts);
        Var wp = model.project_text(t, te.w_cls);
        kernels::copy(wp->val.ptr(), out.txt_proj.ptr() + i * model.cfg.proj_dim,
                      model.cfg.proj_dim);

        out.texts.push_back(std::move(ts));
        out.labels.push_back(item.y);
    }
    return out;
}

std::vector<double> vlm_scores(OmniVLModel& model, const ItemEmbeddings& emb, size_t text_i,
                               const std::vector<size_t>& candidates, const Vocabulary& vocab) {
    const i64 b = static_cast<i64>(candidates.size());
    const i64 d = model.cfg.dim;
    // candidate memories can differ in token count only across modalities;
    // score one batched pass per group of equal length
    std::vector<double> scores(static_cast<size_t>(b), 0.0);
    std::map<i64, std::vector<i64>> by_len;
    for (i64 j = 0; j < b; ++j)
        by_len[emb.vis_tokens[candidates[static_cast<size_t>(j)]].dim(0)].push_back(j);
    for (const auto& [len, rows] : by_len) {
        const i64 g = static_cast<i64>(rows.size());
        Tensor mem({g, len, d});
        for (i64 r = 0; r < g; ++r)
            kernels::copy(emb.vis_tokens[candidates[static_cast<size_t>(rows[static_cast<size_t>(r)])]].ptr(),
                          mem.ptr() + r * len * d, len * d);
        std::vector<TokenSequence> texts(static_cast<size_t>(g),
                                         emb.texts[text_i]);
        TokenSequence batch = stack(texts).with_first(vocab.enc_id());
        std::vector<std::vector<double>> valid(static_cast<size_t>(g),
                                               std::vector<double>(static_cast<size_t>(len), 1.0));
        Tape t;
        FusedRepresentation fused = model.ad.fuse_memory(t, batch, ops::constant(t, mem), valid);
        VlmPrediction pred = model.ad.vlm_head(t, fused);
        for (i64 r = 0; r < g; ++r)
            scores[static_cast<size_t>(rows[static_cast<size_t>(r)])] = pred.p_vlm[static_cast<size_t>(r)];
    }
    return scores;
}

namespace {

std::vector<size_t> order_by_desc(const std::vector<double>& vals) {
    std::vector<size_t> order(vals.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&vals](size_t a, size_t b) { return vals[a] > vals[b]; });
    return order;
}

void fill_recalls(RetrievalDirection& dir, const std::vector<i64>& labels) {
    const size_t n = dir.ranked.size();
    double h1 = 0, h5 = 0, h10 = 0;
    for (size_t q = 0; q < n; ++q) {
        const auto& r = dir.ranked[q];
        for (size_t pos = 0; pos < r.size() && pos < 10; ++pos) {
            if (labels[r[pos]] == labels[q]) {
                if (pos < 1) h1 += 1;
                if (pos < 5) h5 += 1;
                h10 += 1;
                break;
            }
        }
    }
    dir.r1 = h1 / static_cast<double>(n);
    dir.r5 = h5 / static_cast<double>(n);
    dir.r10 = h10 / static_cast<double>(n);
}

}  // namespace

RetrievalResult retrieve(OmniVLModel& model, const Corpus& corpus, const std::vector<size_t>& idx,
                         const Vocabulary& vocab, i64 k) {
    if (k < 1) throw ArgError("retrieve: k must be >= 1");
    if (idx.empty()) throw ArgError("retrieve: empty gallery");
    ItemEmbeddings emb = embed_items(model, corpus, idx, vocab);
    const i64 n = static_cast<i64>(idx.size());
    const i64 dp = model.cfg.proj_dim;

    Tensor sim({n, n});  // sim[i][j] = <text_i, visual_j>
    kernels::mm_nt(emb.txt_proj.ptr(), emb.vis_proj.ptr(), sim.ptr(), 1, n, dp, n, false);

    RetrievalResult out;
    auto run_direction = [&](bool t2v) {
        RetrievalDirection dir;
        for (i64 q = 0; q < n; ++q) {
            std::vector<double> row(static_cast<size_t>(n));
            for (i64 j = 0; j < n; ++j)
                row[static_cast<size_t>(j)] = t2v ? sim.data[q * n + j] : sim.data[j * n + q];
            std::vector<size_t> order = order_by_desc(row);
            const size_t kk = std::min<size_t>(static_cast<size_t>(k), order.size());
            std::vector<size_t> shortlist(order.begin(), order.begin() + kk);
            // VLM re-rank of the shortlist; the tail keeps cosine order
            std::vector<double> p(kk);
            if (t2v) {
                auto s = vlm_scores(model, emb, static_cast<size_t>(q), shortlist, vocab);
                for (size_t r = 0; r < kk; ++r) p[r] = s[r];
            } else {
                for (size_t r = 0; r < kk; ++r) {
                    auto s = vlm_scores(model, emb, shortlist[r], {static_cast<size_t>(q)}, vocab);
                    p[r] = s[0];
                }
            }
            std::vector<size_t> perm = order_by_desc(p);
            std::vector<size_t> final_order(order);
            for (size_t r = 0; r < kk; ++r) final_order[r] = shortlist[perm[r]];
            dir.ranked.push_back(std::move(final_order));
        }
        fill_recalls(dir, emb.labels);
        return dir;
    };
    out.t2v = run_direction(true);
    out.v2t = run_direction(false);
    return out;
}

ProbeResult linear_probe(const Tensor& features, const std::vector<i64>& labels,
                         const std::vector<size_t>& train_idx,
                         const std::vector<size_t>& eval_idx, uint64_t seed) {
    const i64 d = features.last_dim();
    std::map<i64, i64> dense;
    for (i64 l : labels) dense.emplace(l, static_cast<i64>(dense.size()));
    const i64 c = static_cast<i64>(dense.size());
    if (c < 2) throw ArgError("linear probe: need at least 2 classes");

    // standardize on the train rows
    std::vector<double> mean(static_cast<size_t>(d), 0.0), sd(static_cast<size_t>(d), 0.0);
    for (size_t r : train_idx)
        for (i64 j = 0; j < d; ++j) mean[static_cast<size_t>(j)] += features.data[static_cast<i64>(r) * d + j];
    for (auto& m : mean) m /= static_cast<double>(train_idx.size());
    for (size_t r : train_idx)
        for (i64 j = 0; j < d; ++j) {
            const double v = features.data[static_cast<i64>(r) * d + j] - mean[static_cast<size_t>(j)];
            sd[static_cast<size_t>(j)] += v * v;
        }
    for (auto& s : sd) s = std::sqrt(s / static_cast<double>(train_idx.size()) + 1e-8);

    auto standardized = [&](const std::vector<size_t>& rows) {
        Tensor x({static_cast<i64>(rows.size()), d});
        for (size_t r = 0; r < rows.size(); ++r)
            for (i64 j = 0; j < d; ++j)
                x.data[static_cast<i64>(r) * d + j] =
                    (features.data[static_cast<i64>(rows[r]) * d + j] - mean[static_cast<size_t>(j)]) /
                    sd[static_cast<size_t>(j)];
        return x;
    };
    Tensor xtr = standardized(train_idx);
    std::vector<i64> ytr;
    for (size_t r : train_idx) ytr.push_back(dense.at(labels[r]));

    Parameter w, b;
    Rng rng = subseed_rng(seed, "probe");
    w.init("probe.w", gaussian_tensor({d, c}, 0.01, rng));
    b.init("probe.b", Tensor::zeros({c}));
    AdamW opt({&w, &b}, 0.9, 0.999, 1e-8, 0.0);
    const std::vector<double> rw(train_idx.size(), 1.0 / static_cast<double>(train_idx.size()));
    for (int it = 0; it < 300; ++it) {
        Tape t;
        Var logits = ops::linear(t, ops::constant(t, xtr), w.use(t), b.use(t));
        Var loss = ops::masked_ce(t, logits, ytr, rw);
        t.backward(loss);
        opt.step(0.1, t.touched_params());
        opt.zero_grad();
    }

    const std::vector<size_t>& test_rows = eval_idx.empty() ? train_idx : eval_idx;
    Tensor xte = standardized(test_rows);
    Tape t;
    Var logits = ops::linear(t, ops::constant(t, xte), w.use(t), b.use(t));
    double hits = 0;
    for (size_t r = 0; r < test_rows.size(); ++r) {
        const double* row = logits->val.ptr() + static_cast<i64>(r) * c;
        i64 best = 0;
        for (i64 j = 1; j < c; ++j)
            if (row[j] > row[best]) best = j;
        if (best == dense.at(labels[test_rows[r]])) hits += 1;
    }
    ProbeResult res;
    res.accuracy = hits / static_cast<double>(test_rows.size());
    res.frozen_encoder = true;
    return res;
}

ProbeResult probe_encoder(OmniVLModel& model, const Corpus& corpus,
                          const std::vector<size_t>& train_idx,
                          const std::vector<size_t>& eval_idx, uint64_t seed) {
    std::vector<size_t> all = train_idx;
    all.insert(all.end(), eval_idx.begin(), eval_idx.end());
    const uint64_t before = model.registry.value_hash();

    Tensor feats({static_cast<i64>(all.size()), model.cfg.dim});
    for (size_t i = 0; i < all.size(); ++i) {
        Tape t;
        VisualBatch vb = make_visual_batch(corpus, {all[i]}, model.cfg.patch, model.cfg.tubelet);
        EncodedVisual enc = model.ve.encode(t, vb);
        kernels::copy(enc.v_cls->val.ptr(), feats.ptr() + static_cast<i64>(i) * model.cfg.dim,
                      model.cfg.dim);
    }
    std::vector<i64> labels;
    for (size_t i : all) labels.push_back(corpus.items[i].y);
    std::vector<size_t> tr(train_idx.size()), ev(eval_idx.size());
    std::iota(tr.begin(), tr.end(), size_t{0});
    std::iota(ev.begin(), ev.end(), train_idx.size());

    ProbeResult res = linear_probe(feats, labels, tr, ev, seed);
    res.frozen_encoder = model.registry.value_hash() == before;
    if (!res.frozen_encoder)
        throw NumericError("linear probe mutated encoder parameters");
    return res;
}

namespace {

std::map<std::vector<std::string>, i64> ngram_counts(const std::vector<std::string>& toks, size_t n) {
    std::map<std::vector<std::string>, i64> counts;
    if (toks.size() < n) return counts;
    for (size_t i = 0; i + n <= toks.size(); ++i)
        ++counts[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)];
    return counts;
}

}  // namespace

double bleu4(const std::vector<std::string>& candidates,
             const std::vector<std::string>& references) {
    if (candidates.empty() || candidates.size() != references.size())
        throw ArgError("bleu4: need equal, nonempty candidate/reference lists");
    double cand_len = 0, ref_len = 0;
    double clipped[4] = {0, 0, 0, 0}, total[4] = {0, 0, 0, 0};
    for (size_t i = 0; i < candidates.size(); ++i) {
        const auto cand = split_words(candidates[i]);
        const auto ref = split_words(references[i]);
        cand_len += static_cast<double>(cand.size());
        ref_len += static_cast<double>(ref.size());
        for (size_t n = 1; n <= 4; ++n) {
            const auto cc = ngram_counts(cand, n);
            const auto rc = ngram_counts(ref, n);
            for (const auto& [gram, count] : cc) {
                total[n - 1] += static_cast<double>(count);
                auto it = rc.find(gram);
                if (it != rc.end())
                    clipped[n - 1] += static_cast<double>(std::min(count, it->second));
            }
        }
    }
    double logp = 0;
    for (int n = 0; n < 4; ++n) {
        if (clipped[n] <= 0 || total[n] <= 0) return 0.0;
        logp += 0.25 * std::log(clipped[n] / total[n]);
    }
    const double bp = cand_len >= ref_len ? 1.0 : std::exp(1.0 - ref_len / cand_len);
    return bp * std::exp(logp);
}

CaptionEval caption_eval(OmniVLModel& model, const Corpus& corpus,
                         const std::vector<size_t>& idx, const Vocabulary& vocab,
                         const GenerationConfig& base_cfg, bool modality_prefix) {
    CaptionEval out;
    std::vector<std::string> refs;
    for (size_t id : idx) {
        const Triplet& item = corpus.items[id];
        Tape t;
        VisualBatch vb = make_visual_batch(corpus, {id}, model.cfg.patch, model.cfg.tubelet);
        EncodedVisual enc = model.ve.encode(t, vb);
        GenerationConfig cfg = base_cfg;
        if (modality_prefix && cfg.prefix.empty())
            cfg.prefix = item.modality == Modality::image ? "a picture of" : "a video of";
        std::vector<std::vector<double>> valid(1,
            std::vector<double>(static_cast<size_t>(enc.tokens->val.dim(1)), 1.0));
        auto res = model.gd.generate(enc.tokens->val, valid, cfg, vocab);
        out.generated.push_back(res[0].text);
        refs.push_back(item.text);
    }
    out.bleu = bleu4(out.generated, refs);
    double exact = 0;
    for (size_t i = 0; i < refs.size(); ++i)
        if (out.generated[i] == refs[i]) exact += 1;
    out.exact = exact / static_cast<double>(refs.size());
    return out;
}

QaEval qa_eval(OmniVLModel& model, const Corpus& corpus, const std::vector<size_t>& idx,
               const Vocabulary& vocab, i64 max_len) {
    QaEval out;
    double hits = 0;
    for (size_t id : idx) {
        const Triplet& item = corpus.items[id];
        if (item.class_name.empty()) throw ArgError("qa_eval: item has no class label");
        Tape t;
        VisualBatch vb = make_visual_batch(corpus, {id}, model.cfg.patch, model.cfg.tubelet);
        EncodedVisual enc = model.ve.encode(t, vb);
        TokenSequence q = tokenize_text(qa_question(item.modality), vocab, model.cfg.text_len);
        GenerationConfig cfg;
        cfg.max_len = max_len;
        QaModel qa{&model.ad, &model.gd};
        auto res = qa_forward(qa, t, q, enc, cfg, vocab);
        out.answers.push_back(res[0].text);
        if (res[0].text == item.class_name) hits += 1;
    }
    out.accuracy = hits / static_cast<double>(idx.size());
    return out;
}

void qa_finetune(OmniVLModel& model, const Corpus& corpus, const std::vector<size_t>& idx,
                 const Vocabulary& vocab, i64 steps, double lr, i64 batch, uint64_t seed) {
    if (idx.empty()) throw ArgError("qa_finetune: no training items");
    AdamW opt(model.registry.all());
    std::vector<size_t> order = idx;
    Rng rng = subseed_rng(seed, "qa-finetune");
    rng.shuffle(order);
    size_t pos = 0;
    for (i64 s = 0; s < steps; ++s) {
        std::vector<size_t> ids;
        for (i64 k = 0; k < batch; ++k) {
            if (pos >= order.size()) {
                rng.shuffle(order);
                pos = 0;
            }
            ids.push_back(order[pos++]);
            if (static_cast<i64>(ids.size()) >= static_cast<i64>(order.size())) break;
        }
        // group by modality so frame shapes match within the forward pass
        for (Modality m : {Modality::image, Modality::video}) {
            std::vector<size_t> group;
            for (size_t id : ids)
                if (corpus.items[id].modality == m) group.push_back(id);
            if (group.empty()) continue;
            Tape t;
            VisualBatch vb = make_visual_batch(corpus, group, model.cfg.patch, model.cfg.tubelet);
            EncodedVisual enc = model.ve.encode(t, vb);
            std::vector<TokenSequence> qs, as;
            for (size_t id : group) {
                qs.push_back(tokenize_text(qa_question(m), vocab, model.cfg.text_len));
                as.push_back(lm_sequence(corpus.items[id].class_name, vocab, model.cfg.text_len));
            }
            TokenSequence question = stack(qs).with_first(vocab.enc_id());
            QaModel qa{&model.ad, &model.gd};
            auto [mem, valid] = qa_memory(t, qa, question, enc);
            Var loss = model.gd.lm_nll(t, stack(as), mem, valid, vocab);
            t.backward(loss);
            opt.step(lr, t.touched_params());
            opt.zero_grad();
        }
    }
}

std::string AblationTable::formatted() const {
    std::ostringstream os;
    auto cell = [](double v, bool present) {
        if (!present) return std::string("      -");
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%7.3f", v);
        return std::string(buf);
    };
    os << "paradigm        img_tr@1 img_ir@1 vid_ir@1 caption_b@4  qa_img  qa_vid\n";
    for (const auto& r : rows) {
        char name[32];
        std::snprintf(name, sizeof(name), "%-15s", r.paradigm.c_str());
        os << name << " " << cell(r.img_tr1, r.has_image_tasks) << "  "
           << cell(r.img_ir1, r.has_image_tasks) << " " << cell(r.vid_ir1, true) << " "
           << cell(r.caption_b4, r.has_image_tasks) << "     " << cell(r.qa_img, r.has_image_tasks)
           << " " << cell(r.qa_vid, true) << "\n";
    }
    return os.str();
}

AblationTable ablate_paradigms(const Corpus& corpus, const Vocabulary& vocab,
                               const AblationConfig& cfg) {
    if (!corpus.has_modality(Modality::image) || !corpus.has_modality(Modality::video))
        throw ArgError("ablation needs both modalities in the corpus");
    AblationTable table;
    // Table 8 row order
    const Paradigm order[5] = {Paradigm::video_only, Paradigm::image_only,
                               Paradigm::joint_scratch, Paradigm::img2vid, Paradigm::decoupled};
    for (Paradigm p : order) {
        ScheduleConfig sched = cfg.schedule;
        sched.paradigm = p;
        ModelConfig mc = cfg.model;
        OmniVLModel model(mc, cfg.train.seed);
        MomentumEncoders momentum(mc, cfg.train.seed);
        TrainOptions opts = cfg.train;
        opts.outdir.clear();
        Trainer trainer(model, momentum, corpus, vocab, sched, opts);
        trainer.run();

        AblationRow row;
        row.paradigm = paradigm_name(p);
        row.has_image_tasks = p != Paradigm::video_only;

        const auto img_eval = corpus.indices("eval", Modality::image);
        const auto vid_eval = corpus.indices("eval", Modality::video);
        if (row.has_image_tasks && !img_eval.empty()) {
            RetrievalResult r = retrieve(model, corpus, img_eval, vocab, cfg.eval_k);
            row.img_tr1 = r.v2t.r1;
            row.img_ir1 = r.t2v.r1;
            GenerationConfig gcfg;
            gcfg.max_len = model.cfg.text_len;
            row.caption_b4 = caption_eval(model, corpus, img_eval, vocab, gcfg).bleu;
        }
        if (!vid_eval.empty()) {
            RetrievalResult r = retrieve(model, corpus, vid_eval, vocab, cfg.eval_k);
            row.vid_ir1 = r.t2v.r1;
        }
        if (cfg.qa_steps > 0) {
            std::vector<size_t> qa_train;
            for (Modality m : {Modality::image, Modality::video}) {
                if (p == Paradigm::video_only && m == Modality::image) continue;
                auto ids = corpus.indices("train", m);
                qa_train.insert(qa_train.end(), ids.begin(), ids.end());
            }
            qa_finetune(model, corpus, qa_train, vocab, cfg.qa_steps, cfg.qa_lr, cfg.qa_batch,
                        cfg.train.seed);
            if (row.has_image_tasks && !img_eval.empty())
                row.qa_img = qa_eval(model, corpus, img_eval, vocab).accuracy;
            if (!vid_eval.empty()) row.qa_vid = qa_eval(model, corpus, vid_eval, vocab).accuracy;
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace omnivl
