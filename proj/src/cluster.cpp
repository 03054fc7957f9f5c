#include "ocsim/cluster.hpp"

#include "ocsim/errors.hpp"
#include "ocsim/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ocsim::cluster {

namespace {

constexpr const char* kKindNames[] = {"conv1d", "conv2d", "layer"};

// Slots a unit needs to stream one row of width w against a k-tap kernel.
long long chunks_per_row(int width, int k, int unit_len) {
    const int len = std::min(unit_len, width);
    const int per_pass = len - k + 1;
    if (per_pass < 1) throw ShapeError("kernel wider than the unit's driven ports");
    const int outputs = width - k + 1;
    return (outputs + per_pass - 1) / per_pass;
}

struct TaskSpec {
    int job_index = 0;
    int task_index = 0;
    long long duration_slots = 0;
    double ops = 0.0;
    int oc = 0, ic = 0, kernel_row = 0; // conv2d/layer recipe
};

std::vector<TaskSpec> expand_job(const Job& job, int job_index, int unit_len) {
    std::vector<TaskSpec> tasks;
    int index = 0;
    auto push = [&](long long duration, double ops, int oc, int ic, int kr) {
        TaskSpec t;
        t.job_index = job_index;
        t.task_index = index++;
        t.duration_slots = duration;
        t.ops = ops;
        t.oc = oc;
        t.ic = ic;
        t.kernel_row = kr;
        tasks.push_back(t);
    };
    switch (job.kind) {
    case JobKind::Conv1d: {
        const int w = static_cast<int>(job.payload.cols());
        const int k = static_cast<int>(job.kernel.cols());
        push(chunks_per_row(w, k, unit_len), (w - k + 1) * 2.0 * k * 2.0, 0, 0, 0);
        break;
    }
    case JobKind::Conv2d: {
        const int w = static_cast<int>(job.payload.cols());
        const int k = static_cast<int>(job.kernel.cols());
        const auto h_out = static_cast<long long>(job.payload.rows() - job.kernel.rows() + 1);
        for (int kr = 0; kr < job.kernel.rows(); ++kr)
            push(h_out * chunks_per_row(w, k, unit_len),
                 static_cast<double>(h_out) * (w - k + 1) * 2.0 * k * 2.0, 0, 0, kr);
        break;
    }
    case JobKind::Layer: {
        const auto& layer = *job.layer;
        const auto& first = job.layer_input.front();
        const int w = static_cast<int>(first.cols());
        const int k = layer.kernel_size;
        const auto h_out = static_cast<long long>(first.rows() - k + 1);
        for (int oc = 0; oc < layer.out_channels; ++oc)
            for (int ic = 0; ic < layer.in_channels; ++ic)
                for (int kr = 0; kr < k; ++kr)
                    push(h_out * chunks_per_row(w, k, unit_len),
                         static_cast<double>(h_out) * (w - k + 1) * 2.0 * k * 2.0, oc, ic, kr);
        break;
    }
    }
    return tasks;
}

std::vector<int> fifo_order(const std::vector<Job>& jobs) {
    std::vector<int> order(jobs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return jobs[static_cast<std::size_t>(a)].submit_time_ns <
               jobs[static_cast<std::size_t>(b)].submit_time_ns;
    });
    return order;
}

long long ready_slot(double submit_ns, double slot_ns) {
    return static_cast<long long>(std::ceil(submit_ns / slot_ns - 1e-9));
}

} // namespace

const char* job_kind_name(JobKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

JobKind job_kind_from_name(const std::string& name) {
    for (std::size_t i = 0; i < 3; ++i)
        if (name == kKindNames[i]) return static_cast<JobKind>(i);
    throw ConfigError("unknown job kind '" + name + "'");
}

void Job::validate() const {
    if (submit_time_ns < 0.0) throw InvalidParameter("submit time must be >= 0");
    if (origin_edge < 0) throw InvalidParameter("edge index must be >= 0");
    switch (kind) {
    case JobKind::Conv1d:
        if (payload.rows() != 1 || kernel.rows() != 1) throw ShapeError("conv1d takes single rows");
        if (payload.cols() < kernel.cols()) throw ShapeError("payload shorter than the kernel");
        if (kernel.cols() < 1) throw ShapeError("empty kernel");
        break;
    case JobKind::Conv2d:
        if (kernel.rows() != kernel.cols()) throw ShapeError("conv2d kernels must be square");
        if (payload.rows() < kernel.rows() || payload.cols() < kernel.cols())
            throw ShapeError("payload smaller than the kernel");
        break;
    case JobKind::Layer:
        if (!layer) throw ConfigError("layer job without a layer");
        layer->validate();
        if (static_cast<int>(layer_input.size()) != layer->in_channels)
            throw ShapeError("layer input channel count mismatch");
        for (const auto& ch : layer_input)
            if (ch.rows() < layer->kernel_size || ch.cols() < layer->kernel_size)
                throw ShapeError("layer input smaller than the kernel");
        break;
    }
}

void OpuPool::validate() const {
    if (units.empty()) throw ConfigError("empty unit pool");
    for (const auto& u : units) {
        u.validate();
        if (u.baud_ghz != units.front().baud_ghz)
            throw ConfigError("pool units must share one symbol rate");
        if (u.input_length() != units.front().input_length())
            throw ConfigError("pool units must drive the same port count");
        if (u.noise.seed != units.front().noise.seed || u.mode != units.front().mode)
            throw ConfigError("pool units must share one noise configuration");
    }
    if (!(unit_power_mw >= 0.0)) throw InvalidParameter("unit power must be >= 0");
}

std::vector<int> allocate_channels(const opu::WavelengthPlan& plan, int edge_count) {
    plan.validate();
    if (edge_count < 0) throw InvalidParameter("edge count must be >= 0");
    if (edge_count == 0) return {};
    const std::vector<int> free = plan.signal_teeth();
    if (edge_count > static_cast<int>(free.size()))
        throw CapacityError("only " + std::to_string(free.size()) + " data channels for " +
                                std::to_string(edge_count) + " edges",
                            edge_count - static_cast<int>(free.size()));
    return {free.begin(), free.begin() + edge_count};
}

Assignment schedule(const std::vector<Job>& jobs, const OpuPool& pool) {
    pool.validate();
    for (const auto& j : jobs) j.validate();

    const int unit_len = pool.units.front().input_length();
    const double slot = pool.slot_ns();
    std::vector<long long> free_at(pool.units.size(), 0);

    Assignment assignment;
    for (int ji : fifo_order(jobs)) {
        const Job& job = jobs[static_cast<std::size_t>(ji)];
        const long long ready = ready_slot(job.submit_time_ns, slot);
        for (const TaskSpec& task : expand_job(job, ji, unit_len)) {
            std::size_t best = 0;
            long long best_start = std::max(free_at[0], ready);
            for (std::size_t u = 1; u < free_at.size(); ++u) {
                const long long start = std::max(free_at[u], ready);
                if (start < best_start) {
                    best = u;
                    best_start = start;
                }
            }
            Placement p;
            p.job_index = task.job_index;
            p.task_index = task.task_index;
            p.unit = static_cast<int>(best);
            p.start_slot = best_start;
            p.duration_slots = task.duration_slots;
            p.ops = task.ops;
            assignment.placements.push_back(p);
            free_at[best] = best_start + task.duration_slots;
        }
    }
    assignment.makespan_slots = *std::max_element(free_at.begin(), free_at.end());
    return assignment;
}

RunOutput run_cluster(const std::vector<Job>& jobs, const OpuPool& pool,
                      const link::LinkModel& span, std::uint64_t seed) {
    span.validate();
    RunOutput out;
    out.assignment = schedule(jobs, pool);
    const double slot = pool.slot_ns();
    const int unit_len = pool.units.front().input_length();

    out.jobs.resize(jobs.size());
    out.report.utilization = Eigen::ArrayXd::Zero(static_cast<Eigen::Index>(pool.units.size()));

    // Placements grouped back per job, indexed by task.
    std::vector<std::vector<const Placement*>> by_job(jobs.size());
    for (const Placement& p : out.assignment.placements) {
        auto& v = by_job[static_cast<std::size_t>(p.job_index)];
        if (v.size() <= static_cast<std::size_t>(p.task_index))
            v.resize(static_cast<std::size_t>(p.task_index) + 1, nullptr);
        v[static_cast<std::size_t>(p.task_index)] = &p;
        out.report.utilization[p.unit] += static_cast<double>(p.duration_slots);
        out.report.total_ops += p.ops;
    }

    for (std::size_t ji = 0; ji < jobs.size(); ++ji) {
        const Job& job = jobs[ji];
        JobResult& result = out.jobs[ji];
        result.job_id = job.id;
        const std::uint64_t job_seed = derive_seed(seed, job.id);
        const std::vector<TaskSpec> tasks = expand_job(job, static_cast<int>(ji), unit_len);

        try {
            long long finish = 0;
            long long busy = 0;
            for (const TaskSpec& task : tasks) {
                const Placement* p = by_job[ji][static_cast<std::size_t>(task.task_index)];
                finish = std::max(finish, p->start_slot + p->duration_slots);
                busy += p->duration_slots;

                const opu::OpuConfig& unit = pool.units[static_cast<std::size_t>(p->unit)];
                const std::uint64_t task_seed =
                    derive_seed(job_seed, static_cast<std::uint64_t>(task.task_index));

                switch (job.kind) {
                case JobKind::Conv1d: {
                    opu::Kernel k1{job.kernel.row(0).transpose().array()};
                    const Eigen::ArrayXd row = job.payload.row(0).transpose().array();
                    result.output = opu::opu_correlate_row(unit, row, k1, task_seed)
                                        .matrix()
                                        .transpose();
                    break;
                }
                case JobKind::Conv2d: {
                    const auto h_out = job.payload.rows() - job.kernel.rows() + 1;
                    const auto w_out = job.payload.cols() - job.kernel.cols() + 1;
                    if (result.output.size() == 0)
                        result.output = Eigen::MatrixXd::Zero(h_out, w_out);
                    opu::Kernel krow{job.kernel.row(task.kernel_row).transpose().array()};
                    if (krow.weights.abs().maxCoeff() == 0.0) break;
                    for (Eigen::Index i = 0; i < h_out; ++i) {
                        const Eigen::ArrayXd row =
                            job.payload.row(i + task.kernel_row).transpose().array();
                        result.output.row(i) +=
                            opu::opu_correlate_row(unit, row, krow,
                                                   derive_seed(task_seed, static_cast<std::uint64_t>(i)))
                                .matrix()
                                .transpose();
                    }
                    break;
                }
                case JobKind::Layer: {
                    const auto& layer = *job.layer;
                    const auto& input = job.layer_input[static_cast<std::size_t>(task.ic)];
                    const auto h_out = input.rows() - layer.kernel_size + 1;
                    const auto w_out = input.cols() - layer.kernel_size + 1;
                    if (result.layer_output.empty())
                        result.layer_output.assign(static_cast<std::size_t>(layer.out_channels),
                                                   Eigen::MatrixXd::Zero(h_out, w_out));
                    opu::Kernel krow{
                        layer.kernel(task.oc, task.ic).row(task.kernel_row).transpose().array()};
                    if (krow.weights.abs().maxCoeff() == 0.0) break;
                    auto& target = result.layer_output[static_cast<std::size_t>(task.oc)];
                    for (Eigen::Index i = 0; i < h_out; ++i) {
                        const Eigen::ArrayXd row =
                            input.row(i + task.kernel_row).transpose().array();
                        target.row(i) +=
                            opu::opu_correlate_row(unit, row, krow,
                                                   derive_seed(task_seed, static_cast<std::uint64_t>(i)))
                                .matrix()
                                .transpose();
                    }
                    break;
                }
                }
            }
            if (job.kind == JobKind::Layer) {
                const auto& layer = *job.layer;
                for (int oc = 0; oc < layer.out_channels; ++oc) {
                    auto& m = result.layer_output[static_cast<std::size_t>(oc)];
                    m.array() += layer.bias[oc];
                    if (layer.relu) m = m.cwiseMax(0.0);
                }
            }
            result.finish_ns = static_cast<double>(finish) * slot;
            result.latency_ns =
                2.0 * span.one_way_delay_ns() + (result.finish_ns - job.submit_time_ns);
            result.energy_mj =
                static_cast<double>(busy) * slot * pool.unit_power_mw * 1e-9;
        } catch (const SimError& e) {
            result.ok = false;
            result.error = e.what();
        }
    }

    out.report.makespan_ns = static_cast<double>(out.assignment.makespan_slots) * slot;
    for (const JobResult& r : out.jobs) out.report.energy_mj += r.ok ? r.energy_mj : 0.0;
    if (out.report.makespan_ns > 0.0) {
        out.report.achieved_tops = out.report.total_ops / out.report.makespan_ns / 1000.0;
        out.report.utilization /= static_cast<double>(out.assignment.makespan_slots);
    }
    return out;
}

} // namespace ocsim::cluster
