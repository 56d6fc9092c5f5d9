#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "finger_topo.h"

#define CHECK(cond)                                                          \
    do {                                                                     \
        if (!(cond)) {                                                       \
            const char *e = ft_last_error();                                 \
            fprintf(stderr, "%s:%d: %s (%s)\n", __FILE__, __LINE__, #cond,   \
                    e ? e : "no error");                                     \
            return 1;                                                        \
        }                                                                    \
    } while (0)

int main(void) {
    FtConfig *cfg = NULL;
    CHECK(ft_config_parse("[domain]\nelement_size = 2.5\n", &cfg) == FT_STATUS_OK);
    CHECK(ft_config_set(cfg, "optimizer.max_iters=3") == FT_STATUS_OK);
    CHECK(ft_config_set(cfg, "no_such_key=1") == FT_STATUS_CONFIG);
    CHECK(ft_last_error() != NULL);

    FtResult *res = NULL;
    CHECK(ft_optimize(cfg, &res) == FT_STATUS_OK);
    CHECK(ft_result_history_len(res) == 4);

    FtHistoryRow row;
    CHECK(ft_result_history(res, 3, &row) == FT_STATUS_OK);
    CHECK(row.iter == 3);
    CHECK(ft_result_history(res, 4, &row) == FT_STATUS_OUT_OF_RANGE);

    size_t n = ft_result_density_len(res);
    CHECK(n > 0);
    double *rho = malloc(n * sizeof(double));
    CHECK(ft_result_density(res, rho, n) == FT_STATUS_OK);
    for (size_t i = 0; i < n; i++) {
        CHECK(rho[i] >= 0.0 && rho[i] <= 1.0);
    }
    free(rho);

    printf("finger-topo %s: %zu rows, %zu elements\n", ft_version(), ft_result_history_len(res), n);
    ft_result_free(res);
    ft_config_free(cfg);
    return 0;
}
