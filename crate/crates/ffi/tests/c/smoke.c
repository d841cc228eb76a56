#include <math.h>
#include <stdio.h>
#include <stdlib.h>

#include "photon_recon.h"

#define CHECK(call)                                                          \
    do {                                                                     \
        enum PrStatus s_ = (call);                                           \
        if (s_ != PR_STATUS_OK) {                                            \
            char msg_[256];                                                  \
            pr_last_error_message(msg_, sizeof msg_);                        \
            fprintf(stderr, "%s failed with %d: %s\n", #call, (int)s_, msg_); \
            return 1;                                                        \
        }                                                                    \
    } while (0)

int main(void) {
    double d = 0.0;
    CHECK(pr_fock_loss_density(0, 1.0, 0.0, &d));
    if (fabs(d - 1.0 / sqrt(M_PI)) > 1e-14) return 2;
    if (pr_fock_loss_density(-1, 0.5, 0.0, &d) != PR_STATUS_DOMAIN) return 3;

    PrResponse *a = NULL;
    CHECK(pr_response_new(-5.0, 5.0, 100, PR_OVERFLOW_INCLUDE, 20, 0.85, &a));
    size_t rows = 0, cols = 0;
    CHECK(pr_response_dims(a, &rows, &cols));
    if (rows != 102 || cols != 21) return 4;

    double *counts = malloc(rows * sizeof *counts);
    double rho[21], kkt = -1.0;
    CHECK(pr_simulate_counts(a, PR_STATE_COHERENT, 1.0, 100000, 7, counts, rows));
    CHECK(pr_em_reconstruct(a, counts, rows, 2000, rho, 21, &kkt));
    double sum = 0.0;
    for (int n = 0; n < 21; n++) sum += rho[n];
    if (fabs(sum - 1.0) > 1e-12 || kkt < 0.0) return 5;
    if (fabs(rho[0] - exp(-1.0)) > 0.05) return 6;

    if (pr_em_reconstruct(a, counts, rows, 10, rho, 20, NULL) != PR_STATUS_BUFFER_SIZE) return 7;
    size_t need = pr_last_error_message(NULL, 0);
    if (need < 2) return 8;

    pr_response_free(a);
    free(counts);
    printf("ok %s\n", pr_version());
    return 0;
}
