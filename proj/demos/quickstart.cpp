// Two actions over a hidden coin: one reliably lands heads, one is a fair
// coin. With a desire that prefers heads 70/30, the evidence objective picks
// the reliable action while the divergence objective prefers the one whose
// outcome spread is closer to the desire.

#include <iomanip>
#include <iostream>

#include "objlab/objlab.hpp"

int main() {
  using namespace objlab;
  const VariableSpace a{{"a", 2}}, x{{"x", 2}}, o{{"o", 2}};
  const GenerativeModel model(CondTable::from_rows(a, x, {{0.95, 0.05}, {0.6, 0.4}}),
                              CondTable::from_rows(x, o, {{1.0, 0.0}, {0.0, 1.0}}));
  const DesireDistribution desire(JointTable(o, {0.7, 0.3}));

  std::cout << std::fixed << std::setprecision(4);
  for (std::size_t act = 0; act < model.num_actions(); ++act)
    std::cout << "action " << act << ": evidence " << evidence_objective(model, desire, act) << ", divergence "
              << divergence_objective(model, desire, act) << '\n';
  std::cout << "evidence picks action " << best_evidence_action(model, desire) << ", divergence picks action "
            << best_divergence_action(model, desire) << '\n';

  const RelationReport r = divergence_latent_decomposition(model, desire, 1);
  std::cout << r.lhs_label << " = " << r.lhs << " =";
  for (const auto& t : r.terms) std::cout << (t.sign > 0 ? " + " : " - ") << t.label << ' ' << t.value;
  std::cout << "  (residual " << std::scientific << r.residual << ")\n";
}
