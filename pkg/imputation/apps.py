from django.apps import AppConfig


class ImputationConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'imputation'
    verbose_name = 'Bayesian-bootstrap Gaussian copula imputation'
