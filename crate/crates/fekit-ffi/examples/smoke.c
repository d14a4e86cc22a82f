#include <stdio.h>
#include "fekit.h"

int main(void) {
    size_t cells[2] = {8, 8};
    FekitTriangulation *tri = NULL;
    FekitReport report;
    char message[256];

    if (fekit_triangulation_structured(2, cells, &tri) != FEKIT_STATUS_OK) {
        fekit_last_error_message(message, sizeof message);
        fprintf(stderr, "mesh: %s\n", message);
        return 1;
    }
    if (fekit_poisson_solve(tri, FEKIT_POISSON_METHOD_CONTINUOUS, 2, FEKIT_CASE_SINE, 0.0, &report) != FEKIT_STATUS_OK) {
        fekit_last_error_message(message, sizeof message);
        fprintf(stderr, "poisson: %s\n", message);
        fekit_triangulation_free(tri);
        return 1;
    }
    printf("free_dofs\t%zu\nl2_error\t%.6e\n", report.free_dofs, report.l2_error);
    fekit_triangulation_free(tri);
    return 0;
}
