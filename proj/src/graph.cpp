#include "tdsim/graph.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <sstream>

namespace tdsim {

std::string_view tag_name(ValueTag t) {
  switch (t) {
    case ValueTag::Scalar: return "Scalar";
    case ValueTag::Vec3: return "Vec3";
    case ValueTag::Quat: return "Quat";
    case ValueTag::Matrix: return "Matrix";
    case ValueTag::IntMatrix: return "IntMatrix";
    case ValueTag::Series: return "Series";
    case ValueTag::Image: return "Image";
    case ValueTag::Table: return "Table";
  }
  return "?";
}

bool Value::finite() const {
  switch (tag()) {
    case ValueTag::Scalar: return std::isfinite(as_scalar());
    case ValueTag::Vec3: return as_vec3().allFinite();
    case ValueTag::Quat: return as_quat().coeffs().allFinite();
    case ValueTag::Matrix: return as_matrix().allFinite();
    default: return true;
  }
}

void Component::init_state(std::span<double> x) const {
  for (double& v : x) v = 0.0;
}

void Component::derivative(EvalContext&, std::span<double>) {
  throw NumericError("component '" + id_ + "' has no derivative");
}

void Component::update(EvalContext&, double) {}

void Component::post_step(std::span<double>) const {}

void Component::add_input(const std::string& name, ValueTag tag, const std::string& binding,
                          bool state_update) {
  inputs_.push_back({name, tag});
  bindings_.push_back(binding);
  state_update_.push_back(state_update ? 1 : 0);
}

void Component::add_output(const std::string& name, ValueTag tag) {
  outputs_.push_back({name, tag});
}

void Component::add_order_dep(const std::string& component_id) {
  order_deps_.push_back(component_id);
}

Component& Graph::add(std::unique_ptr<Component> c) {
  components_.push_back(std::move(c));
  return *components_.back();
}

Component* Graph::find(const std::string& id) const {
  for (const auto& c : components_)
    if (c->id() == id) return c.get();
  return nullptr;
}

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  for (const auto& f : findings) os << f.what << "\n";
  return os.str();
}

namespace {

bool valid_name(const std::string& s) {
  return !s.empty() && s.find('.') == std::string::npos && s.find(',') == std::string::npos;
}

struct PortIndex {
  // "comp.port" -> tag for every output port
  std::map<std::string, ValueTag> tags;
  std::map<std::string, int> owner;  // component index
};

PortIndex index_outputs(const Graph& g) {
  PortIndex idx;
  const auto& comps = g.components();
  for (std::size_t k = 0; k < comps.size(); ++k) {
    for (const auto& p : comps[k]->output_ports()) {
      idx.tags[comps[k]->id() + "." + p.name] = p.tag;
      idx.owner[comps[k]->id() + "." + p.name] = static_cast<int>(k);
    }
  }
  return idx;
}

// Order dependencies name either a component id or a frame id another
// component provides; both resolve to the providing component.
std::map<std::string, int> dependency_index(const Graph& g) {
  std::map<std::string, int> out;
  const auto& comps = g.components();
  for (std::size_t k = 0; k < comps.size(); ++k) {
    out[comps[k]->id()] = static_cast<int>(k);
    for (const auto& f : comps[k]->provided_frames()) out.emplace(f, static_cast<int>(k));
  }
  return out;
}

// Dependency edges that constrain evaluation order. Edges entering
// state-update inputs and edges into discrete components are dropped: those
// values feed the next state, not the current outputs, which is exactly what
// makes feedback through state legal.
std::vector<std::vector<int>> scheduling_edges(const Graph& g, const PortIndex& idx) {
  const auto& comps = g.components();
  std::vector<std::vector<int>> out(comps.size());
  const std::map<std::string, int> deps = dependency_index(g);
  for (std::size_t k = 0; k < comps.size(); ++k) {
    if (comps[k]->discrete()) continue;
    const auto& su = comps[k]->state_update_inputs();
    const auto& bs = comps[k]->bindings();
    for (std::size_t i = 0; i < bs.size(); ++i) {
      if (su[i]) continue;
      auto it = idx.owner.find(bs[i]);
      if (it != idx.owner.end()) out[it->second].push_back(static_cast<int>(k));
    }
    for (const auto& dep : comps[k]->order_deps()) {
      auto it = deps.find(dep);
      if (it != deps.end() && it->second != static_cast<int>(k))
        out[it->second].push_back(static_cast<int>(k));
    }
  }
  return out;
}

// Deterministic Kahn order (ready set keyed by declaration index). Returns
// the order; nodes left over sit on algebraic cycles.
std::vector<int> topo_order(const std::vector<std::vector<int>>& edges, std::vector<int>* leftover) {
  const int n = static_cast<int>(edges.size());
  std::vector<int> indeg(n, 0);
  for (const auto& es : edges)
    for (int t : es) ++indeg[t];
  std::set<int> ready;
  for (int i = 0; i < n; ++i)
    if (indeg[i] == 0) ready.insert(i);
  std::vector<int> order;
  order.reserve(n);
  while (!ready.empty()) {
    int u = *ready.begin();
    ready.erase(ready.begin());
    order.push_back(u);
    for (int t : edges[u])
      if (--indeg[t] == 0) ready.insert(t);
  }
  if (leftover) {
    leftover->clear();
    for (int i = 0; i < n; ++i)
      if (indeg[i] > 0) leftover->push_back(i);
  }
  return order;
}

}  // namespace

ValidationReport validate_graph(const Graph& g) {
  ValidationReport rep;
  const auto& comps = g.components();

  std::set<std::string> ids;
  for (const auto& c : comps) {
    if (!valid_name(c->id()))
      rep.findings.push_back({"component id '" + c->id() + "' is malformed"});
    if (!ids.insert(c->id()).second)
      rep.findings.push_back({"duplicate component id '" + c->id() + "'"});
    // names are unique per direction; an input may mirror an output's name
    // (bindings only ever address outputs)
    std::set<std::string> outs, ins;
    for (const auto& p : c->output_ports()) {
      if (!valid_name(p.name))
        rep.findings.push_back({"component '" + c->id() + "': malformed port '" + p.name + "'"});
      if (!outs.insert(p.name).second)
        rep.findings.push_back(
            {"component '" + c->id() + "': duplicate output port '" + p.name + "'"});
    }
    for (const auto& p : c->input_ports()) {
      if (!ins.insert(p.name).second)
        rep.findings.push_back(
            {"component '" + c->id() + "': duplicate input port '" + p.name + "'"});
    }
  }

  const PortIndex idx = index_outputs(g);
  const std::map<std::string, int> deps = dependency_index(g);
  for (const auto& c : comps) {
    const auto& ins = c->input_ports();
    for (std::size_t i = 0; i < ins.size(); ++i) {
      const std::string& b = c->bindings()[i];
      auto it = idx.tags.find(b);
      if (it == idx.tags.end()) {
        rep.findings.push_back(
            {"component '" + c->id() + "': input '" + ins[i].name + "' bound to unknown port '" +
             b + "'"});
      } else if (it->second != ins[i].tag) {
        rep.findings.push_back({"component '" + c->id() + "': input '" + ins[i].name + "' expects " +
                                std::string(tag_name(ins[i].tag)) + " but '" + b + "' is " +
                                std::string(tag_name(it->second))});
      }
    }
    for (const auto& dep : c->order_deps()) {
      if (!deps.count(dep))
        rep.findings.push_back(
            {"component '" + c->id() + "': depends on unknown component or frame '" + dep + "'"});
    }
  }
  if (!rep.ok()) return rep;

  std::vector<int> leftover;
  topo_order(scheduling_edges(g, idx), &leftover);
  if (!leftover.empty()) {
    std::ostringstream os;
    os << "algebraic loop among {";
    for (std::size_t i = 0; i < leftover.size(); ++i)
      os << (i ? ", " : "") << comps[leftover[i]]->id();
    os << "}";
    rep.findings.push_back({os.str()});
  }
  return rep;
}

Program Program::compile(Graph& g) {
  ValidationReport rep = validate_graph(g);
  if (!rep.ok()) throw ValidationError("graph validation failed:\n" + rep.to_string());

  Program p;
  p.graph_ = &g;
  const auto& comps = g.components();
  p.compiled_.resize(comps.size());

  for (std::size_t k = 0; k < comps.size(); ++k) {
    auto& cc = p.compiled_[k];
    cc.component = comps[k].get();
    for (const auto& port : comps[k]->output_ports()) {
      const std::string ref = comps[k]->id() + "." + port.name;
      const int slot = static_cast<int>(p.ref_by_slot_.size());
      p.slot_by_ref_[ref] = slot;
      p.ref_by_slot_.push_back(ref);
      p.slot_tags_.push_back(port.tag);
      cc.output_slots.push_back(slot);
    }
    cc.state_len = comps[k]->state_size();
    cc.state_offset = p.state_size_;
    p.state_size_ += cc.state_len;
    if (cc.state_len > 0) p.stateful_.push_back(static_cast<int>(k));
    if (comps[k]->discrete()) p.discrete_.push_back(static_cast<int>(k));
  }
  for (std::size_t k = 0; k < comps.size(); ++k) {
    for (const auto& b : comps[k]->bindings())
      p.compiled_[k].input_slots.push_back(p.slot_by_ref_.at(b));
  }

  const PortIndex idx = index_outputs(g);
  std::vector<int> leftover;
  p.eval_order_ = topo_order(scheduling_edges(g, idx), &leftover);
  return p;
}

VecX Program::initial_state() const {
  VecX x = VecX::Zero(state_size_);
  for (int k : stateful_) {
    const auto& cc = compiled_[k];
    cc.component->init_state(std::span<double>(x.data() + cc.state_offset,
                                               static_cast<std::size_t>(cc.state_len)));
  }
  return x;
}

std::size_t EvalContext::input_count() const {
  return program_->compiled_[current_].input_slots.size();
}

const Value& EvalContext::in(std::size_t i) const {
  const auto& cc = program_->compiled_[current_];
  const auto& slot = (*slots_)[cc.input_slots.at(i)];
  if (!slot.has_value())
    throw NumericError("component '" + cc.component->id() + "': input " +
                       cc.component->input_ports()[i].name + " not yet evaluated");
  return *slot;
}

void EvalContext::out(std::size_t i, Value v) {
  const auto& cc = program_->compiled_[current_];
  const int slot = cc.output_slots.at(i);
  if (v.tag() != program_->slot_tags_[slot])
    throw NumericError("component '" + cc.component->id() + "': port '" +
                       cc.component->output_ports()[i].name + "' produced " +
                       std::string(tag_name(v.tag())) + ", declared " +
                       std::string(tag_name(program_->slot_tags_[slot])));
  if (!v.finite())
    throw NumericError("component '" + cc.component->id() + "': non-finite value on port '" +
                       cc.component->output_ports()[i].name + "'");
  (*slots_)[slot] = std::move(v);
}

std::span<const double> EvalContext::state() const {
  const auto& cc = program_->compiled_[current_];
  return {state_vec_->data() + cc.state_offset, static_cast<std::size_t>(cc.state_len)};
}

void EvalContext::provide_field(const std::string& id, VectorField field) {
  (*fields_)[id] = std::move(field);
}

const VectorField& EvalContext::field(const std::string& id) const {
  auto it = fields_->find(id);
  if (it == fields_->end()) throw NumericError("unknown field '" + id + "'");
  return it->second;
}

const std::string& EvalContext::component_id() const {
  return program_->compiled_[current_].component->id();
}

void Program::run_eval(double t, const VecX& state, std::vector<std::optional<Value>>& slots,
                       FrameTree& frames, std::map<std::string, VectorField>& fields) const {
  if (state.size() != state_size_) throw NumericError("state vector has wrong length");
  slots.assign(ref_by_slot_.size(), std::nullopt);
  frames.clear();
  fields.clear();
  EvalContext ctx;
  ctx.program_ = this;
  ctx.t_ = t;
  ctx.slots_ = &slots;
  ctx.frames_ = &frames;
  ctx.fields_ = &fields;
  ctx.state_vec_ = &state;
  for (int k : eval_order_) {
    ctx.current_ = k;
    compiled_[k].component->eval(ctx);
  }
}

PortValues Program::eval_step(double t, const VecX& state) const {
  std::vector<std::optional<Value>> slots;
  FrameTree frames;
  std::map<std::string, VectorField> fields;
  run_eval(t, state, slots, frames, fields);
  std::map<std::string, Value> out;
  for (std::size_t s = 0; s < slots.size(); ++s) {
    if (slots[s]) out.emplace(ref_by_slot_[s], *slots[s]);
  }
  return PortValues(std::move(out));
}

const Value& PortValues::at(const std::string& port_ref) const {
  auto it = values_.find(port_ref);
  if (it == values_.end()) throw NumericError("no value recorded for port '" + port_ref + "'");
  return it->second;
}

VecX Program::derivative(double t, const VecX& state) const {
  std::vector<std::optional<Value>> slots;
  FrameTree frames;
  std::map<std::string, VectorField> fields;
  run_eval(t, state, slots, frames, fields);
  EvalContext ctx;
  ctx.program_ = this;
  ctx.t_ = t;
  ctx.slots_ = &slots;
  ctx.frames_ = &frames;
  ctx.fields_ = &fields;
  ctx.state_vec_ = &state;
  VecX dx = VecX::Zero(state_size_);
  for (int k : stateful_) {
    ctx.current_ = k;
    const auto& cc = compiled_[k];
    compiled_[k].component->derivative(
        ctx, std::span<double>(dx.data() + cc.state_offset, static_cast<std::size_t>(cc.state_len)));
  }
  if (!dx.allFinite()) throw NumericError("non-finite state derivative");
  return dx;
}

std::vector<Program::RecordEntry> Program::resolve_record(
    const std::vector<std::string>& record) const {
  std::vector<RecordEntry> out;
  for (const auto& ref : record) {
    auto it = slot_by_ref_.find(ref);
    if (it == slot_by_ref_.end())
      throw ValidationError("record: unknown port '" + ref + "'");
    const int slot = it->second;
    switch (slot_tags_[slot]) {
      case ValueTag::Scalar:
        out.push_back({ref, slot, -1});
        break;
      case ValueTag::Vec3: {
        const char* sfx[] = {".x", ".y", ".z"};
        for (int e = 0; e < 3; ++e) out.push_back({ref + sfx[e], slot, e});
        break;
      }
      case ValueTag::Quat: {
        const char* sfx[] = {".w", ".x", ".y", ".z"};
        for (int e = 0; e < 4; ++e) out.push_back({ref + sfx[e], slot, e});
        break;
      }
      default:
        throw ValidationError("record: port '" + ref + "' has non-recordable tag " +
                              std::string(tag_name(slot_tags_[slot])));
    }
  }
  return out;
}

namespace {

double record_element(const Value& v, int element) {
  switch (v.tag()) {
    case ValueTag::Scalar: return v.as_scalar();
    case ValueTag::Vec3: return v.as_vec3()[element];
    case ValueTag::Quat: {
      const Quat& q = v.as_quat();
      const double c[] = {q.w(), q.x(), q.y(), q.z()};
      return c[element];
    }
    default: return std::nan("");
  }
}

}  // namespace

SeriesTable Program::simulate(const SimConfig& cfg) const {
  if (!(cfg.dt > 0)) throw ValidationError("sim: dt must be > 0");
  if (!(cfg.t_end >= 0)) throw ValidationError("sim: t_end must be >= 0");
  const auto rec = resolve_record(cfg.record);

  for (int k : discrete_) compiled_[k].component->reset();

  SeriesTable table;
  for (const auto& r : rec) table.add_channel(r.column, {});

  VecX y = initial_state();
  std::vector<std::optional<Value>> slots;
  FrameTree frames;
  std::map<std::string, VectorField> fields;
  EvalContext ctx;
  ctx.program_ = this;
  ctx.slots_ = &slots;
  ctx.frames_ = &frames;
  ctx.fields_ = &fields;

  double t = 0.0;
  std::vector<double> row(rec.size());
  const double tiny = cfg.dt * 1e-9;
  for (;;) {
    const bool last = t >= cfg.t_end - tiny;
    const double h = last ? 0.0 : std::min(cfg.dt, cfg.t_end - t);
    try {
      run_eval(t, y, slots, frames, fields);
      if (!last && !discrete_.empty()) {
        ctx.t_ = t;
        ctx.state_vec_ = &y;
        for (int k : discrete_) {
          ctx.current_ = k;
          compiled_[k].component->update(ctx, h);
        }
        // re-evaluate so downstream components see the refreshed held values
        run_eval(t, y, slots, frames, fields);
      }
      for (std::size_t i = 0; i < rec.size(); ++i) {
        const auto& slot = slots[rec[i].slot];
        if (!slot) throw NumericError("recorded port '" + rec[i].column + "' was not produced");
        row[i] = record_element(*slot, rec[i].element);
      }
      table.append_row(t, row);
      if (last) break;

      const VecX k1 = derivative(t, y);
      const VecX k2 = derivative(t + 0.5 * h, y + (0.5 * h) * k1);
      const VecX k3 = derivative(t + 0.5 * h, y + (0.5 * h) * k2);
      const VecX k4 = derivative(t + h, y + h * k3);
      y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      for (int k : stateful_) {
        const auto& cc = compiled_[k];
        cc.component->post_step(
            std::span<double>(y.data() + cc.state_offset, static_cast<std::size_t>(cc.state_len)));
      }
    } catch (const NumericError& e) {
      std::ostringstream os;
      os << e.what() << " (simulation aborted; last good time "
         << (table.rows() ? table.times().back() : 0.0) << " s)";
      throw NumericError(os.str());
    }
    t += h;
  }
  return table;
}

}  // namespace tdsim
