#include <math.h>
#include <stdio.h>
#include <string.h>

#include "protorecon.h"

#define CHECK(cond)                                                  \
  do {                                                               \
    if (!(cond)) {                                                   \
      fprintf(stderr, "failed: %s (line %d)\n", #cond, __LINE__);    \
      return 1;                                                      \
    }                                                                \
  } while (0)

int main(void) {
  const double m[5] = {-0.1114, -0.2711, -0.5030, -1.5533, -1.6329};
  const double r[5] = {0.25, 0.25, 0.875, 0.25, 0.125};
  double s[5];
  size_t order[5];
  CHECK(pr_rerank_scores(m, r, 5, 1.26, s, order) == PR_STATUS_OK);
  CHECK(order[0] == 2);
  CHECK(fabs(s[2] - 0.5995) < 5e-4);

  size_t ted = 0;
  CHECK(pr_token_edit_distance("p j e t", "p i t", &ted) == PR_STATUS_OK);
  CHECK(ted == 2);

  PrDataset *ds = NULL;
  CHECK(pr_dataset_parse("proto\tA\nx\ty\n", false, &ds) == PR_STATUS_OK);
  CHECK(pr_dataset_len(ds) == 1);
  pr_dataset_free(ds);

  CHECK(pr_dataset_parse("proto\n", false, &ds) == PR_STATUS_SCHEMA);
  CHECK(pr_last_error() != NULL && strlen(pr_last_error()) > 0);
  CHECK(pr_dataset_parse(NULL, false, &ds) == PR_STATUS_NULL_ARGUMENT);
  printf("ok %s\n", pr_version());
  return 0;
}
