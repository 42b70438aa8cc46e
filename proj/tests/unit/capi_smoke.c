/* Compiled as C to keep the public header free of C++ constructs. */
#include <stdio.h>

#include "debias.h"

int main(void) {
  const double x[] = {-1.0, 0.5, 1.0, 2.0, 0.25};
  dbs_sample* s = NULL;
  dbs_grid* g = NULL;
  double h = 0.0, out[8];
  if (dbs_sample_create(x, 5, 1, &s) != DBS_OK) return 1;
  if (dbs_bandwidth_rot(s, &h) != DBS_OK) return 2;
  if (dbs_grid_uniform(-2.0, 3.0, 8, &g) != DBS_OK) return 3;
  if (dbs_debiased_kde(s, h, 1.0, DBS_KERNEL_GAUSSIAN, g, out) != DBS_OK) return 4;
  dbs_sample* bad = NULL;
  if (dbs_sample_create(NULL, 0, 1, &bad) == DBS_OK) return 5;
  printf("%s h=%.6f p(0)=%.6f\n", dbs_version(), h, out[3]);
  dbs_grid_free(g);
  dbs_sample_free(s);
  return 0;
}
