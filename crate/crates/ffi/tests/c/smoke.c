#include <math.h>
#include <stdio.h>
#include <string.h>

#include "rydberg_ode.h"

int main(int argc, char **argv) {
    if (argc != 2) {
        return 2;
    }
    RydGrid *grid = NULL;
    if (ryd_grid_new("chain", 1, 5.0, &grid) != RYD_STATUS_OK) {
        return 3;
    }
    double p = 0.0;
    if (ryd_simulate_constant(grid, 15.8, 0.0, 0.2, &p, 1) != RYD_STATUS_OK) {
        return 4;
    }
    ryd_grid_free(grid);
    if (fabs(p - pow(sin(15.8 * 0.2 / 2.0), 2)) > 1e-6) {
        return 5;
    }

    if (ryd_grid_new("hexagon", 4, 5.0, &grid) != RYD_STATUS_INVALID_ARGUMENT || ryd_last_error() == NULL) {
        return 6;
    }

    RydModel *model = NULL;
    if (ryd_model_load(argv[1], &model) != RYD_STATUS_OK) {
        fprintf(stderr, "%s\n", ryd_last_error());
        return 7;
    }
    size_t n_features = 0;
    ryd_model_info(model, NULL, NULL, NULL, &n_features);
    double x[64] = {0};
    double soft = -1.0;
    if (n_features > 64 || ryd_model_predict(model, x, n_features, &soft) != RYD_STATUS_OK) {
        return 8;
    }
    char *json = NULL;
    if (ryd_model_export(model, x, n_features, &json) != RYD_STATUS_OK || strstr(json, "braketSchemaHeader") == NULL) {
        return 9;
    }
    ryd_string_free(json);
    ryd_model_free(model);
    printf("%.17g\n", soft);
    return 0;
}
