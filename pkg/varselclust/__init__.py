from .__version__ import version as __version__
from .data import DataMatrix, load_csv, save_csv
from .errors import VarselError
from .metrics import adjusted_rand_index, contingency_table, num_selected, vser
from .mixture import CovarianceFamily, MixtureFit, best_mixture, bic_mixture, em_fit, param_count
from .modsel import (IndepForm, RegressionForm, SelectedModel, Variant, VariableRoles, criterion,
                     fit_indep, fit_regression, select_predictors, select_roles)
from .sparse import SparseFit, bcss_per_variable, sparse_kmeans_fit, tune_t, update_weights
from .simulate import Experiment, ScenarioSpec, generate
