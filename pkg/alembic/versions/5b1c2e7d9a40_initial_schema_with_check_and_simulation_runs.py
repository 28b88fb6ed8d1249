"""Initial schema with check_run and simulation_run tables

Revision ID: 5b1c2e7d9a40
Revises: 
Create Date: 2026-10-17 09:12:41.204518

"""
from typing import Sequence, Union

from alembic import op
import sqlalchemy as sa


# revision identifiers, used by Alembic.
revision: str = '5b1c2e7d9a40'
down_revision: Union[str, Sequence[str], None] = None
branch_labels: Union[str, Sequence[str], None] = None
depends_on: Union[str, Sequence[str], None] = None


def upgrade() -> None:
    """Upgrade schema."""
    op.create_table('check_run',
    sa.Column('id', sa.Integer(), autoincrement=True, nullable=False),
    sa.Column('thread', sa.String(), nullable=False),
    sa.Column('maxlen', sa.Integer(), nullable=False),
    sa.Column('capacity_msg', sa.Integer(), nullable=False),
    sa.Column('capacity_reply', sa.Integer(), nullable=False),
    sa.Column('mode', sa.String(), nullable=False),
    sa.Column('strategy', sa.String(), nullable=False),
    sa.Column('equivalent', sa.Boolean(), nullable=False),
    sa.Column('lhs_states', sa.Integer(), nullable=False),
    sa.Column('rhs_states', sa.Integer(), nullable=False),
    sa.Column('counterexample', sa.Text(), nullable=True),
    sa.Column('created_at', sa.DateTime(), server_default=sa.text('(CURRENT_TIMESTAMP)'), nullable=False),
    sa.PrimaryKeyConstraint('id')
    )
    op.create_table('simulation_run',
    sa.Column('id', sa.Integer(), autoincrement=True, nullable=False),
    sa.Column('thread', sa.String(), nullable=False),
    sa.Column('maxlen', sa.Integer(), nullable=False),
    sa.Column('strategy', sa.String(), nullable=False),
    sa.Column('seed', sa.Integer(), nullable=False),
    sa.Column('env', sa.String(), nullable=False),
    sa.Column('busy', sa.Integer(), nullable=False),
    sa.Column('idle', sa.Integer(), nullable=False),
    sa.Column('total', sa.Integer(), nullable=False),
    sa.Column('utilization', sa.Float(), nullable=False),
    sa.Column('msgs', sa.Integer(), nullable=False),
    sa.Column('replies', sa.Integer(), nullable=False),
    sa.Column('discarded', sa.Integer(), nullable=False),
    sa.Column('created_at', sa.DateTime(), server_default=sa.text('(CURRENT_TIMESTAMP)'), nullable=False),
    sa.PrimaryKeyConstraint('id')
    )
    op.create_index('ix_simulation_run_thread', 'simulation_run', ['thread'])


def downgrade() -> None:
    """Downgrade schema."""
    op.drop_index('ix_simulation_run_thread', table_name='simulation_run')
    op.drop_table('simulation_run')
    op.drop_table('check_run')
