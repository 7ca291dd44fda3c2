#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tdsim/frames.hpp"
#include "tdsim/value.hpp"

namespace tdsim {

struct PortSpec {
  std::string name;
  ValueTag tag;
};

class EvalContext;

/// A node of the dataflow graph. Stateless components compute outputs from
/// inputs every evaluation; stateful components expose their integrated state
/// on outputs and provide a derivative; discrete components hold their
/// outputs between major steps and refresh them in update(). Feedback cycles
/// are legal only through stateful or discrete components.
class Component {
 public:
  explicit Component(std::string id) : id_(std::move(id)) {}
  virtual ~Component() = default;
  Component(const Component&) = delete;
  Component& operator=(const Component&) = delete;

  const std::string& id() const { return id_; }
  virtual std::string_view kind() const = 0;

  const std::vector<PortSpec>& input_ports() const { return inputs_; }
  const std::vector<PortSpec>& output_ports() const { return outputs_; }
  const std::vector<std::string>& bindings() const { return bindings_; }
  /// True marks a state-update input: it feeds only the derivative, so its
  /// edge does not constrain evaluation order and may close a feedback loop.
  const std::vector<char>& state_update_inputs() const { return state_update_; }
  /// Component ids that must evaluate before this one for reasons other than
  /// port bindings (frame parentage, field lookups).
  const std::vector<std::string>& order_deps() const { return order_deps_; }
  /// Frame ids this component registers while evaluating.
  virtual std::vector<std::string> provided_frames() const { return {}; }

  virtual int state_size() const { return 0; }
  bool stateful() const { return state_size() > 0; }
  virtual void init_state(std::span<double> x) const;
  virtual bool discrete() const { return false; }
  /// Clear held/discrete memory before a simulation run.
  virtual void reset() {}

  virtual void eval(EvalContext& ctx) = 0;
  virtual void derivative(EvalContext& ctx, std::span<double> dx);
  virtual void update(EvalContext& ctx, double dt);
  /// Hook run on the state slice after each accepted integration step.
  virtual void post_step(std::span<double> x) const;

 protected:
  void add_input(const std::string& name, ValueTag tag, const std::string& binding,
                 bool state_update = false);
  void add_output(const std::string& name, ValueTag tag);
  void add_order_dep(const std::string& component_id);

 private:
  std::string id_;
  std::vector<PortSpec> inputs_;
  std::vector<std::string> bindings_;
  std::vector<char> state_update_;
  std::vector<PortSpec> outputs_;
  std::vector<std::string> order_deps_;
};

/// Ordered collection of components; the unit that gets validated and
/// compiled into an executable Program.
class Graph {
 public:
  Component& add(std::unique_ptr<Component> c);
  const std::vector<std::unique_ptr<Component>>& components() const { return components_; }
  Component* find(const std::string& id) const;

 private:
  std::vector<std::unique_ptr<Component>> components_;
};

struct Finding {
  std::string what;
};

struct ValidationReport {
  std::vector<Finding> findings;
  bool ok() const { return findings.empty(); }
  std::string to_string() const;
};

/// Reports duplicate ids, malformed ids/ports, dangling bindings, tag
/// mismatches, unknown frame/order dependencies and algebraic loops.
ValidationReport validate_graph(const Graph& g);

struct SimConfig {
  double dt = 0.0;
  double t_end = 0.0;
  std::vector<std::string> record;
};

/// Snapshot of every output port of one evaluation.
class PortValues {
 public:
  PortValues(std::map<std::string, Value> values) : values_(std::move(values)) {}
  const Value& at(const std::string& port_ref) const;
  const std::map<std::string, Value>& all() const { return values_; }

 private:
  std::map<std::string, Value> values_;
};

/// Validated, schedulable form of a Graph. Owns the evaluation order, the
/// port slot layout and the state layout; the graph itself stays borrowed.
/// One Program drives one simulation at a time (discrete components keep
/// held values inside the component objects).
class Program {
 public:
  /// Throws ValidationError (with the full report) unless validate_graph
  /// comes back clean.
  static Program compile(Graph& g);

  int state_size() const { return state_size_; }
  VecX initial_state() const;

  /// One evaluation pass at (t, state); deterministic for fixed inputs.
  PortValues eval_step(double t, const VecX& state) const;
  /// Time derivative of the packed state at (t, state).
  VecX derivative(double t, const VecX& state) const;

  /// Classic fixed-step 4th-order Runge-Kutta over [0, t_end], recording the
  /// configured ports every step including both endpoints.
  SeriesTable simulate(const SimConfig& cfg) const;

 private:
  friend class EvalContext;
  struct CompiledComponent {
    Component* component = nullptr;
    std::vector<int> input_slots;
    std::vector<int> output_slots;
    int state_offset = 0;
    int state_len = 0;
  };
  struct RecordEntry {
    std::string column;
    int slot;
    int element;  // -1 scalar, else index into vec3/quat coefficients
  };

  void run_eval(double t, const VecX& state, std::vector<std::optional<Value>>& slots,
                FrameTree& frames, std::map<std::string, VectorField>& fields) const;
  std::vector<RecordEntry> resolve_record(const std::vector<std::string>& record) const;

  Graph* graph_ = nullptr;
  std::vector<CompiledComponent> compiled_;   // declaration order
  std::vector<int> eval_order_;               // indices into compiled_
  std::map<std::string, int> slot_by_ref_;    // "comp.port" -> slot
  std::vector<std::string> ref_by_slot_;
  std::vector<ValueTag> slot_tags_;
  int state_size_ = 0;
  std::vector<int> stateful_;                 // indices of stateful components
  std::vector<int> discrete_;                 // indices of discrete components
};

/// Evaluation-time services handed to components.
class EvalContext {
 public:
  double t() const { return t_; }
  std::size_t input_count() const;
  const Value& in(std::size_t i) const;
  void out(std::size_t i, Value v);
  std::span<const double> state() const;
  FrameTree& frames() { return *frames_; }
  const FrameTree& frames() const { return *frames_; }
  void provide_field(const std::string& id, VectorField field);
  const VectorField& field(const std::string& id) const;
  const std::string& component_id() const;

 private:
  friend class Program;
  const Program* program_ = nullptr;
  double t_ = 0.0;
  int current_ = 0;
  std::vector<std::optional<Value>>* slots_ = nullptr;
  FrameTree* frames_ = nullptr;
  std::map<std::string, VectorField>* fields_ = nullptr;
  const VecX* state_vec_ = nullptr;
};

}  // namespace tdsim
