# Generated by Django 5.1.2 on 2026-10-17 09:12

from django.db import migrations, models


class Migration(migrations.Migration):
    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="Run",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                (
                    "kind",
                    models.CharField(
                        choices=[
                            ("train", "Train"),
                            ("bounds", "Bounds"),
                            ("optimize", "Optimize"),
                            ("experiment", "Experiment"),
                        ],
                        max_length=20,
                    ),
                ),
                ("dataset_hash", models.CharField(blank=True, db_index=True, max_length=64)),
                ("ensemble_hash", models.CharField(blank=True, db_index=True, max_length=64)),
                ("config", models.JSONField(blank=True, default=dict)),
                ("report", models.JSONField(blank=True, default=dict)),
                ("created_at", models.DateTimeField(auto_now_add=True)),
            ],
            options={
                "ordering": ["-created_at", "-id"],
            },
        ),
    ]
