#include "opra/service.hpp"

#include <algorithm>
#include <fstream>
#include <functional>

namespace opra {

using nlohmann::json;

namespace {

json optional_bool(const std::optional<bool>& v) { return v ? json(*v) : json(nullptr); }
json optional_double(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

template <typename T>
T field(const json& body, const char* key) {
    try {
        return body.at(key).get<T>();
    } catch (const json::exception&) {
        throw HttpError(400, std::string("request needs field \"") + key + "\"");
    }
}

Concept concept_field(const json& body) { return require_concept(field<std::string>(body, "concept")); }

}  // namespace

bool FilterState::contains(const SentenceRecord& r) const {
    const auto& c = r.coc[concept_id];
    if (!c) return coc_min <= 0.0 && coc_max >= 1.0;
    return *c >= coc_min && *c <= coc_max;
}

std::string_view job_status_name(JobStatus s) {
    switch (s) {
        case JobStatus::queued: return "queued";
        case JobStatus::running: return "running";
        case JobStatus::done: return "done";
        case JobStatus::failed: return "failed";
    }
    return "queued";
}

json to_json(const JobHandle& job) {
    json j{{"id", job.id},
           {"kind", job.kind},
           {"status", job_status_name(job.status)},
           {"progress", {{"completed", job.completed}, {"total", job.total}}}};
    if (!job.error.empty()) j["error"] = job.error;
    if (job.report) j["report"] = to_json(*job.report);
    return j;
}

Workspace::Workspace(Parts parts)
    : dataset_(std::move(parts.dataset)),
      templates_(std::move(parts.templates)),
      llm_(std::move(parts.llm)),
      config_(std::move(parts.config)),
      layout_(std::move(parts.layout)) {
    worker_ = std::thread([this] { worker_loop(); });
}

Workspace::~Workspace() {
    {
        std::lock_guard lock(job_mutex_);
        stopping_ = true;
    }
    job_cv_.notify_all();
    if (worker_.joinable()) worker_.join();
}

std::unique_ptr<Workspace> Workspace::from_config(const ServiceConfig& cfg) {
    Parts parts;
    if (cfg.dataset_store.empty()) throw Error("config needs a dataset store");
    parts.dataset = load(cfg.dataset_store);
    if (!cfg.template_store.empty() && std::filesystem::exists(cfg.template_store))
        parts.templates = TemplatePool::load(cfg.template_store);
    parts.llm = make_language_model(cfg);
    if (!cfg.layout_store.empty() && std::filesystem::exists(cfg.layout_store)) {
        std::ifstream in(cfg.layout_store);
        parts.layout = layout_from_json(json::parse(in));
    }
    parts.config = cfg;
    return std::make_unique<Workspace>(std::move(parts));
}

// ---------------------------------------------------------------- views

const Layout& Workspace::ensure_layout() {
    std::vector<std::int64_t> active;
    for (const auto& r : dataset_.records)
        if (!r.excluded) active.push_back(r.id);
    if (layout_) {
        std::vector<std::int64_t> have;
        for (const auto& p : layout_->points) have.push_back(p.id);
        if (have == active) return *layout_;
    }
    for (const auto& r : dataset_.records)
        if (!r.excluded && r.embedding.empty())
            throw HttpError(409, "layout needs embeddings; run the embed step first");
    try {
        layout_ = compute_layout(dataset_, geometry_, config_.gravity, config_.tsne);
    } catch (const HttpError&) {
        throw;
    } catch (const Error& e) {
        throw HttpError(409, std::string("cannot compute layout: ") + e.what());
    }
    return *layout_;
}

json Workspace::get_layout(std::optional<Concept> requested, HistogramScale scale, std::optional<std::size_t> bins) {
    std::unique_lock lock(data_mutex_);
    const Concept c = requested.value_or(filter_.concept_id);
    const Layout& layout = ensure_layout();

    json points = json::array();
    std::vector<double> cocs;
    for (const auto& p : layout.points) {
        const SentenceRecord* r = dataset_.find(p.id);
        points.push_back({{"id", p.id},
                          {"x", p.p.x},
                          {"y", p.p.y},
                          {"coc", optional_double(r->coc[c])},
                          {"in_filter", filter_.contains(*r)}});
        cocs.push_back(r->coc[c].value_or(0.5));
    }
    const auto positions = axis_projection(layout.points, c, geometry_);
    const Histogram hist = histogram(positions, bins.value_or(config_.histogram_bins), scale, cocs);

    json doc = to_json(layout, geometry_);
    doc["points"] = points;
    doc["concept"] = concept_id(c);
    doc["histogram"] = to_json(hist);
    doc["filter"] = {{"concept", concept_id(filter_.concept_id)},
                     {"coc_min", filter_.coc_min},
                     {"coc_max", filter_.coc_max}};
    return doc;
}

json Workspace::put_filter(const json& body) {
    FilterState next;
    next.concept_id = concept_field(body);
    next.coc_min = body.value("coc_min", 0.0);
    next.coc_max = body.value("coc_max", 1.0);
    if (!(next.coc_min >= 0.0 && next.coc_max <= 1.0 && next.coc_min <= next.coc_max))
        throw HttpError(400, "filter needs 0 <= coc_min <= coc_max <= 1");
    std::unique_lock lock(data_mutex_);
    filter_ = next;
    json doc{{"concept", concept_id(next.concept_id)}, {"coc_min", next.coc_min}, {"coc_max", next.coc_max}};
    doc["count"] = filtered_ids_locked().size();
    return doc;
}

json Workspace::get_filter() const {
    std::shared_lock lock(data_mutex_);
    return {{"concept", concept_id(filter_.concept_id)},
            {"coc_min", filter_.coc_min},
            {"coc_max", filter_.coc_max},
            {"count", filtered_ids_locked().size()}};
}

std::vector<std::int64_t> Workspace::filtered_ids_locked() const {
    std::vector<std::int64_t> ids;
    for (const auto& r : dataset_.records)
        if (!r.excluded && filter_.contains(r)) ids.push_back(r.id);
    return ids;
}

std::vector<std::int64_t> Workspace::filtered_ids() const {
    std::shared_lock lock(data_mutex_);
    return filtered_ids_locked();
}

FilterState Workspace::filter() const {
    std::shared_lock lock(data_mutex_);
    return filter_;
}

Dataset Workspace::dataset() const {
    std::shared_lock lock(data_mutex_);
    return dataset_;
}

json Workspace::get_table(const std::string& sort, bool descending, bool include_excluded) const {
    std::shared_lock lock(data_mutex_);
    const Concept c = filter_.concept_id;
    std::vector<const SentenceRecord*> rows;
    for (const auto& r : dataset_.records)
        if ((include_excluded || !r.excluded) && filter_.contains(r)) rows.push_back(&r);

    auto mismatch = [c](const SentenceRecord* r) {
        return r->llm_label[c] && r->expert_label[c] && *r->llm_label[c] != *r->expert_label[c];
    };
    std::function<bool(const SentenceRecord*, const SentenceRecord*)> less;
    if (sort.empty() || sort == "id")
        less = [](auto a, auto b) { return a->id < b->id; };
    else if (sort == "coc")
        less = [c](auto a, auto b) { return a->coc[c].value_or(-1.0) < b->coc[c].value_or(-1.0); };
    else if (sort == "text")
        less = [](auto a, auto b) { return a->text < b->text; };
    else if (sort == "mismatch")
        less = [&](auto a, auto b) { return mismatch(a) > mismatch(b); };
    else
        throw HttpError(400, "unknown sort key: " + sort);
    std::stable_sort(rows.begin(), rows.end(), [&](auto a, auto b) { return descending ? less(b, a) : less(a, b); });

    json out = json::array();
    for (const auto* r : rows)
        out.push_back({{"id", r->id},
                       {"text", r->text},
                       {"coc", optional_double(r->coc[c])},
                       {"expert_label", optional_bool(r->expert_label[c])},
                       {"llm_label", optional_bool(r->llm_label[c])},
                       {"mismatch", mismatch(r)},
                       {"excluded", r->excluded}});
    return {{"concept", concept_id(c)}, {"rows", out}, {"count", out.size()}};
}

void Workspace::rescale_locked() {
    for (Concept c : dataset_.concepts) {
        std::vector<double> raw;
        for (const auto& r : dataset_.records)
            if (!r.excluded && r.coc_raw[c]) raw.push_back(*r.coc_raw[c]);
        if (raw.empty()) continue;
        const ScalingParams params = fit_scaling(raw);
        dataset_.coc_scaling[c] = params;
        for (auto& r : dataset_.records)
            if (r.coc_raw[c]) r.coc[c] = apply_scaling(*r.coc_raw[c], params);
    }
}

json Workspace::post_exclude(const json& body) {
    const auto id = field<std::int64_t>(body, "id");
    const bool excluded = body.value("excluded", true);
    std::unique_lock lock(data_mutex_);
    SentenceRecord* r = dataset_.find(id);
    if (!r) throw HttpError(404, "no sentence " + std::to_string(id));
    if (r->excluded != excluded) {
        r->excluded = excluded;
        rescale_locked();
        persist_dataset_locked();
    }
    return {{"id", id}, {"excluded", excluded}, {"active", dataset_.active_count()}};
}

json Workspace::get_clouds(Concept c, const std::vector<std::int64_t>& selected) const {
    std::shared_lock lock(data_mutex_);
    const TagClouds clouds = build_tagclouds(dataset_, c, config_.clouds);
    return {{"concept", concept_id(c)},
            {"true", to_json(clouds.true_side, highlight(dataset_, selected, clouds.true_side, config_.clouds))},
            {"false", to_json(clouds.false_side, highlight(dataset_, selected, clouds.false_side, config_.clouds))}};
}

json Workspace::get_reasoning(std::int64_t sentence, Concept c, std::optional<std::size_t> generated) const {
    std::shared_lock lock(data_mutex_);
    const auto it = assessments_.find({sentence, c});
    if (it == assessments_.end())
        throw HttpError(404, "sentence " + std::to_string(sentence) + " has no " + std::string(concept_id(c)) +
                                 " assessment yet");
    const AssessmentResult& result = it->second;
    const AttentionSummary summary = summarize(result);

    std::vector<std::size_t> gen_ids;
    std::optional<std::size_t> reasoning_id;
    for (const auto& s : result.transcript) {
        if (!s.generated) continue;
        gen_ids.push_back(s.id);
        if (s.role == SentenceRole::reasoning) reasoning_id = s.id;
    }
    json audits = json::array();
    for (auto g : gen_ids) audits.push_back(to_json(audit_view(summary, g)));
    json doc{{"assessment", to_json(result)}, {"audits", audits}, {"available", summary.available}};
    const auto focus = generated ? generated : (reasoning_id ? reasoning_id : std::optional<std::size_t>{});
    if (focus) {
        try {
            doc["audit"] = to_json(audit_view(summary, *focus));
        } catch (const Error& e) {
            throw HttpError(400, e.what());
        }
    } else if (!gen_ids.empty()) {
        doc["audit"] = to_json(audit_view(summary, gen_ids.back()));
    }
    return doc;
}

json Workspace::get_template(Concept c, Strategy s, std::optional<std::int64_t> version) const {
    std::shared_lock lock(data_mutex_);
    if (!templates_.contains(c, s))
        throw HttpError(404, "no template for " + std::string(concept_id(c)) + "/" + std::string(strategy_name(s)));
    const PromptTemplate& t = version ? templates_.get(c, s, *version) : templates_.latest(c, s);
    return {{"template", to_json(t)}, {"rendered", render_template(t)}, {"latest", templates_.latest(c, s).version}};
}

json Workspace::post_template_edit(const json& body) {
    const Concept c = concept_field(body);
    const Strategy s = body.contains("strategy") ? parse_strategy(field<std::string>(body, "strategy")) : config_.strategy;
    const TemplateEdit edit = template_edit_from_json(body.contains("edit") ? body.at("edit") : body);
    std::unique_lock lock(data_mutex_);
    if (!templates_.contains(c, s))
        throw HttpError(404, "no template for " + std::string(concept_id(c)) + "/" + std::string(strategy_name(s)));
    EditResult r;
    try {
        r = templates_.edit(c, s, edit);
    } catch (const ParseError&) {
        throw;
    } catch (const Error& e) {
        throw HttpError(422, e.what());
    }
    persist_templates_locked();
    return {{"template", to_json(r.updated)}, {"version", r.updated.version}, {"diff", to_json(r.diff)}};
}

json Workspace::post_assess(const json& body) {
    const auto id = field<std::int64_t>(body, "sentence");
    const Concept c = concept_field(body);
    const Strategy s = body.contains("strategy") ? parse_strategy(field<std::string>(body, "strategy")) : config_.strategy;
    std::string text;
    PromptTemplate t;
    {
        std::shared_lock lock(data_mutex_);
        const SentenceRecord* r = dataset_.find(id);
        if (!r) throw HttpError(404, "no sentence " + std::to_string(id));
        if (!templates_.contains(c, s))
            throw HttpError(404, "no template for " + std::string(concept_id(c)) + "/" + std::string(strategy_name(s)));
        text = r->text;
        t = templates_.latest(c, s);
    }
    AssessmentResult result = assess_text(id, text, c, t, *llm_);
    std::unique_lock lock(data_mutex_);
    dataset_.find(id)->llm_label[c] = result.label;
    json doc = to_json(result);
    assessments_[{id, c}] = std::move(result);
    persist_dataset_locked();
    return doc;
}

// ---------------------------------------------------------------- jobs

json Workspace::post_reassess(const json& body) {
    const Concept c = concept_field(body);
    const Strategy s = body.contains("strategy") ? parse_strategy(field<std::string>(body, "strategy")) : config_.strategy;
    const Scope scope = parse_scope(body.value("scope", std::string("filtered_subset")));
    Job job;
    job.concept_id = c;
    job.strategy = s;
    {
        std::shared_lock lock(data_mutex_);
        if (!templates_.contains(c, s))
            throw HttpError(404, "no template for " + std::string(concept_id(c)) + "/" + std::string(strategy_name(s)));
        job.ids = scope_ids(dataset_, scope, scope == Scope::filtered_subset ? filtered_ids_locked()
                                                                             : std::vector<std::int64_t>{});
    }
    job.handle.total = job.ids.size();
    std::lock_guard lock(job_mutex_);
    job.handle.id = next_job_++;
    const auto id = job.handle.id;
    jobs_[id] = std::move(job);
    queue_.push_back(id);
    job_cv_.notify_all();
    return to_json(jobs_[id].handle);
}

json Workspace::get_job(std::int64_t id) const {
    std::lock_guard lock(job_mutex_);
    const auto it = jobs_.find(id);
    if (it == jobs_.end()) throw HttpError(404, "no job " + std::to_string(id));
    return to_json(it->second.handle);
}

JobHandle Workspace::wait_job(std::int64_t id, std::chrono::milliseconds timeout) const {
    std::unique_lock lock(job_mutex_);
    const auto it = jobs_.find(id);
    if (it == jobs_.end()) throw HttpError(404, "no job " + std::to_string(id));
    job_cv_.wait_for(lock, timeout, [&] {
        const auto st = it->second.handle.status;
        return st == JobStatus::done || st == JobStatus::failed;
    });
    return it->second.handle;
}

void Workspace::worker_loop() {
    for (;;) {
        std::int64_t id = 0;
        {
            std::unique_lock lock(job_mutex_);
            job_cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
            if (queue_.empty()) return;
            id = queue_.front();
            queue_.pop_front();
            jobs_[id].handle.status = JobStatus::running;
        }
        job_cv_.notify_all();
        run_job(id);
        job_cv_.notify_all();
    }
}

void Workspace::run_job(std::int64_t id) {
    Job job;
    {
        std::lock_guard lock(job_mutex_);
        job = jobs_[id];
    }
    try {
        Dataset snapshot;
        PromptTemplate t;
        {
            std::shared_lock lock(data_mutex_);
            t = templates_.latest(job.concept_id, job.strategy);
            for (auto rid : job.ids)
                if (const auto* r = dataset_.find(rid)) snapshot.records.push_back(*r);
        }
        std::vector<std::int64_t> present;
        for (const auto& r : snapshot.records) present.push_back(r.id);
        ReassessOptions options;
        options.parallelism = config_.reassess_parallelism;
        options.commit = [&](const AssessmentResult& result) {
            std::unique_lock lock(data_mutex_);
            SentenceRecord* r = dataset_.find(result.sentence_id);
            if (!r) throw Error("sentence vanished");
            r->llm_label[job.concept_id] = result.label;
            assessments_[{result.sentence_id, job.concept_id}] = result;
        };
        options.progress = [&](std::size_t done, std::size_t total) {
            {
                std::lock_guard lock(job_mutex_);
                jobs_[id].handle.completed = done;
                jobs_[id].handle.total = total;
            }
            job_cv_.notify_all();
        };
        ReassessReport report = reassess_all(snapshot, present, job.concept_id, t, *llm_, options);
        {
            std::shared_lock lock(data_mutex_);
            persist_dataset_locked();
        }
        std::lock_guard lock(job_mutex_);
        auto& h = jobs_[id].handle;
        h.report = std::move(report);
        h.status = JobStatus::done;
    } catch (const std::exception& e) {
        std::lock_guard lock(job_mutex_);
        auto& h = jobs_[id].handle;
        h.status = JobStatus::failed;
        h.error = e.what();
    }
}

void Workspace::persist_dataset_locked() const {
    if (!config_.dataset_store.empty()) save(dataset_, config_.dataset_store);
}

void Workspace::persist_templates_locked() const {
    if (!config_.template_store.empty()) templates_.save(config_.template_store);
}

}  // namespace opra
