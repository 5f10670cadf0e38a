#include <math.h>
#include <stdio.h>
#include <string.h>

#include "invariant_kit.h"

#define CHECK(cond)                                                   \
  do {                                                                \
    if (!(cond)) {                                                    \
      fprintf(stderr, "%s:%d: %s (%s)\n", __FILE__, __LINE__, #cond, \
              ik_last_error_message());                               \
      return 1;                                                       \
    }                                                                 \
  } while (0)

static const char *CONFIG =
    "{\"kind\": \"mcbf\", \"states\": [\"x\"],"
    " \"expressions\": {\"f\": [\"0\"], \"g\": [[\"1\"]], \"h\": \"x\", \"mu\": \"w\","
    "   \"A\": [[\"1\"], [\"-1\"]], \"b\": [\"1\", \"1\"], \"k_nom\": [\"0\"]},"
    " \"domain\": {\"lo\": [-2], \"hi\": [2], \"grid\": [41]},"
    " \"jobs\": [{\"job\": \"classify\"}]}";

int main(void) {
  const char *vars[] = {"x", "y"};
  IkExpr *e = NULL;
  CHECK(ik_expr_parse("sin(x)*y", vars, 2, &e) == IK_STATUS_OK);
  double p[2] = {0.5, 2.0}, v = 0.0, g[2];
  bool kink = true;
  CHECK(ik_expr_eval(e, p, 2, &v) == IK_STATUS_OK);
  CHECK(fabs(v - 2.0 * sin(0.5)) < 1e-15);
  CHECK(ik_expr_grad(e, p, 2, g, &kink) == IK_STATUS_OK);
  CHECK(fabs(g[0] - 2.0 * cos(0.5)) < 1e-15 && !kink);
  ik_expr_free(e);

  CHECK(ik_expr_parse("x +", vars, 1, &e) == IK_STATUS_PARSE);
  CHECK(strlen(ik_last_error_message()) > 0);

  int code = -1;
  char *json = NULL;
  CHECK(ik_classify_mu("3*cbrt(w)^2", false, false, &code, &json) == IK_STATUS_OK);
  CHECK(code == 1 && strstr(json, "not_minimal") != NULL);
  ik_string_free(json);

  IkControlProblem *prob = NULL;
  CHECK(ik_control_problem_from_json(CONFIG, &prob) == IK_STATUS_OK);
  double x = -0.5, u = 0.0;
  bool feasible = false;
  CHECK(ik_qp_filter(prob, &x, 1, &u, 1, &feasible) == IK_STATUS_OK);
  CHECK(feasible && fabs(u - 0.5) < 1e-12);
  x = -2.0;
  CHECK(ik_qp_filter(prob, &x, 1, &u, 1, &feasible) == IK_STATUS_OK && !feasible);
  ik_control_problem_free(prob);

  printf("ok %s\n", ik_version());
  return 0;
}
